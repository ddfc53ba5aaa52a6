#include "spca/nonlinearity.hpp"

#include <cmath>

namespace spca {

void NonlinearitySpec::validate() const
{
    if (kind != NonlinearityKind::linear && kind != NonlinearityKind::sign &&
        kind != NonlinearityKind::asym_adaptive)
        require(a > 0.0 && std::isfinite(a), "nonlinearity: scale a must be > 0");
}

Activation nonlinearity_eval(const NonlinearitySpec& spec, const Mat& z)
{
    spec.validate();
    Activation out;
    switch (spec.kind) {
    case NonlinearityKind::scaled_tanh: {
        const double a = spec.a;
        out.h = (a * (z.array() / a).tanh()).matrix();
        out.dh = (1.0 - out.h.array().square() / (a * a)).matrix();
        break;
    }
    case NonlinearityKind::hard_tanh: {
        const double a = spec.a;
        out.h = z.array().max(-a).min(a).matrix();
        out.dh = (z.array().abs() < a).cast<double>().matrix();
        break;
    }
    case NonlinearityKind::asym_const: {
        const Mat t = z.array().tanh().matrix();
        out.h = spec.a * t;
        out.dh = (spec.a * (1.0 - t.array().square())).matrix();
        break;
    }
    case NonlinearityKind::asym_adaptive: {
        const Mat t = z.array().tanh().matrix();
        out.h.resize(z.rows(), z.cols());
        out.dh.resize(z.rows(), z.cols());
        for (Index j = 0; j < z.cols(); ++j) {
            const double mean = t.col(j).mean();
            const double var = (t.col(j).array() - mean).square().mean();
            const double sd = std::sqrt(std::max(var, kVarianceFloor));
            out.h.col(j) = t.col(j) / sd;
            out.dh.col(j) = ((1.0 - t.col(j).array().square()) / sd).matrix();
        }
        break;
    }
    case NonlinearityKind::linear:
        out.h = z;
        out.dh = Mat::Ones(z.rows(), z.cols());
        break;
    case NonlinearityKind::sign:
        out.h = z.array().sign().matrix();
        out.dh = Mat::Zero(z.rows(), z.cols());
        break;
    }
    if (spec.derivative == DerivativeMode::identity)
        out.dh = Mat::Ones(z.rows(), z.cols());
    return out;
}

std::string to_string(NonlinearityKind kind)
{
    switch (kind) {
    case NonlinearityKind::scaled_tanh: return "scaled_tanh";
    case NonlinearityKind::hard_tanh: return "hard_tanh";
    case NonlinearityKind::asym_const: return "asym_const";
    case NonlinearityKind::asym_adaptive: return "asym_adaptive";
    case NonlinearityKind::linear: return "linear";
    case NonlinearityKind::sign: return "sign";
    }
    return "unknown";
}

NonlinearityKind nonlinearity_from_string(const std::string& name)
{
    for (auto k : {NonlinearityKind::scaled_tanh, NonlinearityKind::hard_tanh, NonlinearityKind::asym_const,
                   NonlinearityKind::asym_adaptive, NonlinearityKind::linear, NonlinearityKind::sign})
        if (to_string(k) == name)
            return k;
    throw std::invalid_argument("unknown nonlinearity '" + name + "'");
}

}  // namespace spca
