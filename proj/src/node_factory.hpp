#pragma once

#include "cds/autodiff.hpp"

namespace cds::detail {

// Creates an op node; prunes parents/backward when no parent needs gradients.
NodePtr make_node(Array value, std::vector<NodePtr> parents, std::function<void(Node&)> bw);

} // namespace cds::detail
