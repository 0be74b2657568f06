#pragma once

#include <string>
#include <vector>

namespace pcan {

struct CertificationCase {
    std::string name;
    double max_rel_error = 0.0;  // worst coordinate over all seeds
    double tolerance = 0.0;
    bool passed = false;
};

struct CertificationReport {
    std::vector<CertificationCase> cases;
    bool all_passed = true;
};

/// Central-difference certification of every analytic gradient in the
/// library: cross-entropy, the hierarchical loss in both modes, calibration
/// at both levels under both FP sign conventions, diversity amplification,
/// and the rectified forward pass differentiated through to the head
/// parameters. Each case runs `seeds` random instances.
CertificationReport run_gradient_certification(int seeds = 20, double tolerance = 1e-4,
                                               double h = 1e-5);

} // namespace pcan
