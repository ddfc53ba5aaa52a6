#ifndef SPCA_OPTIM_HPP
#define SPCA_OPTIM_HPP

#include "spca/constraints.hpp"
#include "spca/gradient.hpp"
#include "spca/linalg.hpp"

#include <functional>
#include <optional>

namespace spca {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 0.01;
    double momentum = 0.9;  // sgd
    double beta1 = 0.9;     // adam
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimizerConfig sgd(double lr = 0.01, double momentum = 0.9)
    {
        OptimizerConfig c;
        c.lr = lr;
        c.momentum = momentum;
        return c;
    }
    static OptimizerConfig adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
    {
        OptimizerConfig c;
        c.kind = OptimizerKind::adam;
        c.lr = lr;
        c.beta1 = beta1;
        c.beta2 = beta2;
        c.eps = eps;
        return c;
    }
    void validate() const;
};

// Momentum SGD (v <- mu v + g, p <- p - lr v) and Adam with bias correction.
// Parameter blocks are addressed by slot; state is created on first use.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config);

    // Advances the shared time step; call once before updating the blocks of a step.
    void begin_step() { ++t_; }
    void update(std::size_t slot, double* param, const double* grad, Index size);
    template <typename Derived, typename G>
    void update(std::size_t slot, Eigen::PlainObjectBase<Derived>& param, const Eigen::MatrixBase<G>& grad)
    {
        require(param.size() == grad.size(), "optimizer: gradient size mismatch");
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> g = grad;
        update(slot, param.data(), g.data(), param.size());
    }
    long step_count() const { return t_; }
    const OptimizerConfig& config() const { return config_; }

private:
    OptimizerConfig config_;
    long t_ = 0;
    std::vector<Vec> m_;
    std::vector<Vec> v_;
};

// Trainable parameters. sigma is empty unless trainable.
struct Params {
    Mat W;
    Vec sigma;
};

// A gradient op bound to its statistics. `update_statistics` (optional) runs
// before `grad` on every batch; `evaluate` scores full data for checkpointing.
struct Method {
    std::function<void(const Params&, const Mat& batch)> update_statistics;
    std::function<GradResult(const Params&, const Mat& batch, Rng&)> grad;
    std::function<double(const Params&, const Mat& data)> evaluate;
};

enum class CheckpointPolicy { best_loss, last };

struct TrainConfig {
    OptimizerConfig optimizer;
    int batch_size = 100;
    int epochs = 100;
    std::uint64_t seed = 0;
    ConstraintSpec constraints;
    CheckpointPolicy checkpoint = CheckpointPolicy::best_loss;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;       // evaluate() on the full data after the epoch
    double objective = 0.0;  // mean batch objective during the epoch
    double orth_residual = 0.0;
};

struct TrainResult {
    Params params;        // selected by the checkpoint policy
    Params final_params;  // after the last epoch
    int best_epoch = 0;
    double best_loss = 0.0;
    std::vector<EpochRecord> history;
    int reinitialised_columns = 0;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, Params snapshot, int epoch, long step)
        : std::runtime_error(what), snapshot(std::move(snapshot)), epoch(epoch), step(step) {}
    Params snapshot;
    int epoch;
    long step;
};

// Per step: statistics, gradient (+ regulariser terms), optimizer, then
// orthogonality projection and unit-norm projection. Zero columns are redrawn
// from the run's generator.
TrainResult train(const Method& method, const DataMatrix<double>& data, Params init, const TrainConfig& config);

struct GradCheckReport {
    double max_rel_error = 0.0;  // max_i |num_i - ana_i| / max_j max(|num_j|, |ana_j|)
    Index checked = 0;
    Index worst = -1;
    bool passed = false;
};

// Central differences (f(θ+h) - f(θ-h)) / 2h. With max_coords > 0 only that
// many coordinates, drawn from rng, are probed.
GradCheckReport grad_check(const std::function<double(const Vec&)>& loss, const Vec& theta, const Vec& analytic,
                           double h = 1e-6, double tol = 1e-5, Index max_coords = 0, Rng* rng = nullptr);

// Column-major flattening helpers for grad_check.
inline Vec flatten(const Mat& M) { return Eigen::Map<const Vec>(M.data(), M.size()); }
inline Mat unflatten(const Vec& v, Index rows, Index cols) { return Eigen::Map<const Mat>(v.data(), rows, cols); }

}  // namespace spca

#endif
