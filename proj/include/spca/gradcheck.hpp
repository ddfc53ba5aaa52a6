#ifndef SPCA_GRADCHECK_HPP
#define SPCA_GRADCHECK_HPP

#include "spca/core.hpp"

#include <string>
#include <vector>

namespace spca {

struct GradSuiteEntry {
    std::string module;  // linear_pca | sigma_pca | ica | constraints
    std::string op;
    int instances = 0;
    double max_rel_error = 0.0;  // worst over instances
    bool passed = false;
};

struct GradSuiteOptions {
    std::uint64_t seed = 0;
    int instances = 5;
    double h = 1e-6;
    double tol = 1e-5;
};

// Central-difference check of every op that has a stated loss. Each loss is
// re-evaluated from its definition with stop-gradient factors and batch
// statistics frozen at the evaluation point; update rules without a loss are
// not listed.
std::vector<GradSuiteEntry> run_gradient_suite(const GradSuiteOptions& options = {});

}  // namespace spca

#endif
