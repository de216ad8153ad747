#pragma once

#include <cstdint>

#include "vgpds/dataset.hpp"
#include "vgpds/kernels.hpp"

namespace vgpds {

struct SynthConfig {
    std::uint64_t seed = 0;
    Eigen::Index n = 100;        // rows, split evenly over sequences
    Eigen::Index d = 12;
    Eigen::Index sequences = 1;
    TemporalKernelSpec temporal = TemporalKernelSpec::rbf(1.0, 10.0);
    ArdKernelParams mapping{1.0, Vector::Ones(2)};  // its dimension is Q_true
    // Noise precision; infinity gives noiseless outputs.
    double beta = 100.0;
    double time_step = 1.0;
};

/// One ancestral sample of the generative model together with its hidden parts.
struct SynthSample {
    TimeSeriesDataset data;
    Matrix latent;  // N x Q_true
    Matrix f;       // noiseless outputs, N x D
};

SynthSample synth_generate(const SynthConfig &config);

}  // namespace vgpds
