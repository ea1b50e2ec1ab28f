#pragma once

#include <memory>
#include <optional>
#include <string>

#include "cropmesh/te.hpp"

namespace cropmesh {

enum class PolicyId {
  NaiveMesh,
  FlowSchedRate,
  ApSelect,
  CentralRouting,  // full engine
  HopCount,
  Manhattan,
  TwoFourAboveCanopy,
};

const char* policy_name(PolicyId id);
std::optional<PolicyId> policy_from_name(const std::string& s);
PolicyConfig policy_config(PolicyId id);
std::unique_ptr<Planner> make_planner(PolicyId id);

}  // namespace cropmesh
