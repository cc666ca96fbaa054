#pragma once

#include <string>
#include <vector>

#include "gnn/optim.hpp"

namespace gnn {

// Finite-difference gradient check of one named layer on a small random
// graph (5-10 nodes). Known names: dense, gcn, cheb, sage, arma, gcs,
// gat, gin, appnp, ecc, topk, sagpool, diffpool, mincut, global_sum,
// global_avg, gap, awsp.
GradCheckResult layer_gradient_check(const std::string& layer, uint64_t seed);

const std::vector<std::string>& gradcheck_layer_names();

}  // namespace gnn
