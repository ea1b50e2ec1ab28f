#include "cropmesh/baselines.hpp"

namespace cropmesh {

const char* policy_name(PolicyId id) {
  switch (id) {
    case PolicyId::NaiveMesh: return "naive";
    case PolicyId::FlowSchedRate: return "flowsched";
    case PolicyId::ApSelect: return "apselect";
    case PolicyId::CentralRouting: return "central";
    case PolicyId::HopCount: return "hopcount";
    case PolicyId::Manhattan: return "manhattan";
    case PolicyId::TwoFourAboveCanopy: return "twofour";
  }
  return "?";
}

std::optional<PolicyId> policy_from_name(const std::string& s) {
  for (PolicyId id :
       {PolicyId::NaiveMesh, PolicyId::FlowSchedRate, PolicyId::ApSelect,
        PolicyId::CentralRouting, PolicyId::HopCount, PolicyId::Manhattan,
        PolicyId::TwoFourAboveCanopy}) {
    if (s == policy_name(id)) return id;
  }
  return std::nullopt;
}

PolicyConfig policy_config(PolicyId id) {
  PolicyConfig c;
  c.name = policy_name(id);
  switch (id) {
    case PolicyId::NaiveMesh:
      c.managed = false;
      c.ap_rule = ApRule::Nearest;
      c.route_rule = RouteRule::RandomMonotone;
      c.channel_rule = ChannelRule::RandomFixed;
      break;
    case PolicyId::FlowSchedRate:
      c.ap_rule = ApRule::Nearest;
      c.route_rule = RouteRule::RandomMonotone;
      c.channel_rule = ChannelRule::RandomFixed;
      break;
    case PolicyId::ApSelect:
    case PolicyId::Manhattan:
      c.ap_rule = ApRule::MinF;
      c.route_rule = RouteRule::RandomMonotone;
      c.channel_rule = ChannelRule::MinF;
      break;
    case PolicyId::CentralRouting:
      c.ap_rule = ApRule::MinF;
      c.route_rule = RouteRule::Weighted;
      c.channel_rule = ChannelRule::MinF;
      break;
    case PolicyId::HopCount:
      c.ap_rule = ApRule::MinF;
      c.route_rule = RouteRule::HopCountDet;
      c.channel_rule = ChannelRule::MinF;
      break;
    case PolicyId::TwoFourAboveCanopy:
      c.ap_rule = ApRule::MinF;
      c.route_rule = RouteRule::WeightedTwoFour;
      c.channel_rule = ChannelRule::MinF;
      break;
  }
  return c;
}

std::unique_ptr<Planner> make_planner(PolicyId id) {
  return std::make_unique<GreedyPlanner>(policy_config(id));
}

}  // namespace cropmesh
