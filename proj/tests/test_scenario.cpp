#include <gtest/gtest.h>

#include <regex>

#include "mgsim/scenario.hpp"
#include "support.hpp"

using namespace mgsim;
using testing_support::bundled_text;

namespace {

ErrorKind parse_error_kind(const std::string& text, std::string* what = nullptr) {
  try {
    parse_scenario(text);
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::IoError;
}

std::string drop_section(const std::string& text, const std::string& section) {
  return std::regex_replace(text, std::regex("\\[" + section + "\\][^\\[]*"), "");
}

}  // namespace

TEST(Scenario, EveryBundledScenarioLoads) {
  std::size_t count = 0;
  for (const auto& e : std::filesystem::directory_iterator(MGSIM_SCENARIO_DIR)) {
    if (e.path().extension() != ".ini") continue;
    EXPECT_NO_THROW(load_scenario(e.path())) << e.path();
    ++count;
  }
  EXPECT_GE(count, 10u);
}

TEST(Scenario, CleanRingContents) {
  const auto cfg = testing_support::load("ring4_clean");
  EXPECT_EQ(cfg.name, "ring4_clean");
  EXPECT_EQ(cfg.agents, 4u);
  EXPECT_EQ(cfg.graph.neighbors(0), (std::vector<AgentId>{1, 3}));
  EXPECT_EQ(cfg.controller.v_ref, 315.0);
  EXPECT_EQ(cfg.plant.converters.size(), 4u);
  EXPECT_TRUE(cfg.attacks.empty());
  EXPECT_NEAR(cfg.predictor.t_loop, cfg.controller.kp_h1 / cfg.controller.ki_h1, 1e-15);
}

TEST(Scenario, MissingGraphSectionNamed) {
  std::string what;
  EXPECT_EQ(parse_error_kind(drop_section(bundled_text("ring4_clean"), "graph"), &what), ErrorKind::ParseError);
  EXPECT_NE(what.find("[graph]"), std::string::npos) << what;
}

TEST(Scenario, MissingPlantSectionNamed) {
  std::string what;
  EXPECT_EQ(parse_error_kind(drop_section(bundled_text("ring4_clean"), "plant"), &what), ErrorKind::ParseError);
  EXPECT_NE(what.find("[plant]"), std::string::npos) << what;
}

TEST(Scenario, ReplayIsUnknownAttackKind) {
  const auto text = bundled_text("ring4_clean") + "\n[attack]\nkind = replay\ntargets = 0\n";
  EXPECT_EQ(parse_error_kind(text), ErrorKind::UnknownAttackKind);
}

TEST(Scenario, DanglingReferences) {
  const auto base = bundled_text("ring4_clean");
  EXPECT_EQ(parse_error_kind(base + "\n[attack]\nkind = fdi\ntargets = 9\n"), ErrorKind::DanglingAgentReference);
  EXPECT_EQ(parse_error_kind(base + "\n[attack]\nkind = dos\nlinks = 0-7\nmagnitude = 0.1\n"),
            ErrorKind::DanglingAgentReference);
  EXPECT_EQ(parse_error_kind(std::regex_replace(base, std::regex("edge = 3 0 20"), "edge = 3 5 20")),
            ErrorKind::DanglingAgentReference);
}

TEST(Scenario, UnknownKeyAndSection) {
  const auto base = bundled_text("ring4_clean");
  EXPECT_EQ(parse_error_kind(std::regex_replace(base, std::regex("t_end = 5"), "t_ende = 5")), ErrorKind::ParseError);
  EXPECT_EQ(parse_error_kind(base + "\n[extras]\nx = 1\n"), ErrorKind::ParseError);
}

TEST(Scenario, CommPeriodMustBeMultipleOfDt) {
  const auto text = std::regex_replace(bundled_text("ring4_clean"), std::regex("comm_period = 1e-3"),
                                       "comm_period = 1.5e-4");
  EXPECT_EQ(parse_error_kind(text), ErrorKind::InvalidParams);
}

TEST(Scenario, BadZetaRejected) {
  const auto text = bundled_text("ring4_clean") + "\n[attack]\nkind = hijack\ntargets = 0\nzeta = 0.5\n";
  EXPECT_EQ(parse_error_kind(text), ErrorKind::InvalidZeta);
}

TEST(Scenario, AttackFields) {
  const auto cfg = testing_support::load("fig13_dos_compensated");
  ASSERT_EQ(cfg.attacks.size(), 1u);
  const auto& a = cfg.attacks[0];
  EXPECT_EQ(a.kind, AttackKind::Dos);
  EXPECT_EQ(a.links, (std::vector<Link>{{2, 3}}));
  EXPECT_EQ(a.magnitude, 0.15);
  EXPECT_EQ(a.start, 3.0);
  EXPECT_TRUE(cfg.predictor.enabled);
}

TEST(Scenario, MissingOptionalSectionsAreNoted) {
  const auto text = drop_section(drop_section(bundled_text("ring4_clean"), "predictor"), "selfheal");
  const auto cfg = parse_scenario(text);
  EXPECT_FALSE(cfg.notices.empty());
  EXPECT_FALSE(cfg.predictor.enabled);
}
