#pragma once

#include <cstddef>
#include <vector>

#include "scoreembed/model.hpp"

namespace scoreembed::testing {

using Rows = std::vector<std::vector<double>>;

// Straightforward re-implementations used as oracles. They share no code
// with the library beyond the parameter containers.

std::vector<double> naive_feature_map(const Rows& sentence, const std::vector<double>& weights, double bias,
                                      std::size_t width, Activation activation);

// Eval-mode logits computed from scratch.
std::vector<double> naive_logits(const Model& model, const IndexSeq& indices);

}  // namespace scoreembed::testing
