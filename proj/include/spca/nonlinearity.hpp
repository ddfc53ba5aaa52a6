#ifndef SPCA_NONLINEARITY_HPP
#define SPCA_NONLINEARITY_HPP

#include "spca/core.hpp"

#include <string>

namespace spca {

enum class NonlinearityKind {
    scaled_tanh,    // a tanh(z/a)
    hard_tanh,      // clamp(z, -a, a); derivative 0 at and beyond the kinks
    asym_const,     // a tanh(z), default gain 1.6
    asym_adaptive,  // tanh(z) / sd(tanh(z)), sd per column and frozen
    linear,
    sign,
};

enum class DerivativeMode { exact, identity };

struct NonlinearitySpec {
    NonlinearityKind kind = NonlinearityKind::scaled_tanh;
    double a = 4.0;
    DerivativeMode derivative = DerivativeMode::exact;

    static NonlinearitySpec scaled_tanh(double a) { return {NonlinearityKind::scaled_tanh, a, DerivativeMode::exact}; }
    static NonlinearitySpec hard_tanh(double a) { return {NonlinearityKind::hard_tanh, a, DerivativeMode::exact}; }
    static NonlinearitySpec asym_const(double a = 1.6) { return {NonlinearityKind::asym_const, a, DerivativeMode::identity}; }
    static NonlinearitySpec asym_adaptive() { return {NonlinearityKind::asym_adaptive, 1.0, DerivativeMode::identity}; }
    static NonlinearitySpec linear() { return {NonlinearityKind::linear, 1.0, DerivativeMode::exact}; }
    static NonlinearitySpec sign() { return {NonlinearityKind::sign, 1.0, DerivativeMode::exact}; }

    void validate() const;
};

struct Activation {
    Mat h;
    Mat dh;
};

// Elementwise h(z) and h'(z); identity derivative mode returns ones.
Activation nonlinearity_eval(const NonlinearitySpec& spec, const Mat& z);

std::string to_string(NonlinearityKind kind);
NonlinearityKind nonlinearity_from_string(const std::string& name);

}  // namespace spca

#endif
