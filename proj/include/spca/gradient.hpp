#ifndef SPCA_GRADIENT_HPP
#define SPCA_GRADIENT_HPP

#include "spca/core.hpp"

#include <vector>

namespace spca {

// Loss and gradients for one batch, stop-gradient factors already frozen.
// `loss` is the objective whose derivative is dW (halved batch-mean squared
// errors); `recon_error` is the plain batch-mean ||x - xhat||^2 used for
// reporting and checkpoint selection. Update-rule variants without a loss set
// dW = -update and report the reconstruction part only.
struct GradResult {
    double loss = 0.0;
    double recon_error = 0.0;
    Mat dW;
    Vec dsigma;             // set only when sigma is a trainable parameter
    std::vector<int> cuts;  // nested-dropout cut indices (1-based), one per draw
};

}  // namespace spca

#endif
