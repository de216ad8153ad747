#pragma once

#include "vgpds/linalg.hpp"

namespace vgpds {

/// k-nearest-neighbour reconstruction. For each test row the k training rows
/// closest in the observed columns (Euclidean) are found and their missing
/// columns averaged. Ties in distance go to the lower training row index.
///   train_observed: N x |p|, train_missing: N x |m|, test_observed: N* x |p|.
Matrix nn_baseline(const Matrix &train_observed, const Matrix &train_missing, const Matrix &test_observed, int k);

}  // namespace vgpds
