#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "qcl/io.hpp"

using namespace qcl;
namespace fs = std::filesystem;

TEST(Json, ParseErrorCarriesLocation) {
  try {
    io::parse_json("{\n  \"n\": 3,\n  \"x0\": [1, 2,, 3]\n}");
    FAIL();
  } catch (const io::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_GT(e.column(), 10u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Json, FloatsUseSeventeenDigits) {
  const io::Json j = {{"third", 1.0 / 3.0}, {"one", 1.0}, {"k", 3}};
  const std::string s = io::dump(j);
  EXPECT_NE(s.find("0.33333333333333331"), std::string::npos);
  EXPECT_NE(s.find("\"one\": 1.0"), std::string::npos);
  EXPECT_NE(s.find("\"k\": 3"), std::string::npos);
  EXPECT_EQ(io::parse_json(s)["third"].get<double>(), 1.0 / 3.0);
}

TEST(Csv, ShortestRoundTrip) {
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(0.5), "0.5");
  EXPECT_EQ(io::format_double(2.0), "2");
  const double v = 2.8333333333333335;
  EXPECT_EQ(std::stod(io::format_double(v)), v);
}

TEST(Schema, ScheduleRoundTrip) {
  RandomScenarioOptions o;
  o.seed = 5;
  o.n = 5;
  o.switching = std::make_pair(3, 0.4);
  const auto cfg = random_connected(o);
  const auto back = io::schedule_from_json(io::parse_json(io::dump(io::to_json(cfg.schedule))));
  ASSERT_EQ(back.segments().size(), cfg.schedule.segments().size());
  for (std::size_t k = 0; k < back.segments().size(); ++k) {
    EXPECT_EQ(back.segments()[k].start, cfg.schedule.segments()[k].start);
    EXPECT_EQ(back.segments()[k].graph, cfg.schedule.segments()[k].graph);
  }
  EXPECT_EQ(back.period(), cfg.schedule.period());
}

TEST(Schema, ScheduleValidation) {
  auto bad = [](const char* text) { return io::schedule_from_json(io::parse_json(text)); };
  EXPECT_THROW(bad(R"({"n": 2, "segments": [{"t": 0, "edges": [{"i": 0, "j": 2, "w": 1}]}], "a_low": 1, "a_high": 1})"),
               io::ParseError);
  EXPECT_THROW(bad(R"({"n": 2, "segments": [{"t": 0, "edges": [{"i": 0, "j": 0, "w": 1}]}], "a_low": 1, "a_high": 1})"),
               io::ParseError);
  EXPECT_THROW(bad(R"({"n": 2, "segments": [{"t": 0, "edges": [{"i": 0, "j": 1, "w": 5}]}], "a_low": 1, "a_high": 2})"),
               InputError);
  EXPECT_THROW(bad(R"({"segments": []})"), io::ParseError);
  EXPECT_NO_THROW(bad(R"({"n": 2, "segments": [{"t": 0, "edges": []}], "period": null, "a_low": 1, "a_high": 1})"));
}

TEST(Schema, QuantizerAndPolicy) {
  const auto u = io::quantizer_from_json(io::parse_json(R"({"type":"uniform","delta":0.5})"));
  EXPECT_EQ(u.delta(), 0.5);
  const auto g = io::quantizer_from_json(io::parse_json(R"({"type":"general","levels":[0,1,5],"thresholds":[0.5,3]})"));
  EXPECT_EQ(g.krasovskii_set(3.0).hi, 5.0);
  EXPECT_THROW(io::quantizer_from_json(io::parse_json(R"({"type":"log"})")), io::ParseError);

  const auto p = io::policy_from_json(io::parse_json(R"({"type":"fixed_alpha","alpha":[{"i":1,"alpha":0.25}]})"));
  EXPECT_EQ(std::get<FixedAlphaPolicy<double>>(p).alpha.at(1), 0.25);
  EXPECT_TRUE(std::holds_alternative<SequentialSlowPolicy>(io::policy_from_json(io::parse_json(R"("sequential_slow")"))));
  EXPECT_THROW(io::policy_from_json(io::parse_json(R"({"type":"greedy"})")), io::ParseError);
}

TEST(Schema, ScenarioRoundTrip) {
  const auto cfg = example2_sliding(5, 1.0, 2.0);
  const auto back = io::scenario_from_json(io::parse_json(io::dump(io::to_json(cfg))));
  EXPECT_EQ(back.name, cfg.name);
  EXPECT_EQ(back.x0, cfg.x0);
  EXPECT_EQ(back.horizon, cfg.horizon);
  EXPECT_EQ(std::get<FixedAlphaPolicy<double>>(back.policy).alpha,
            std::get<FixedAlphaPolicy<double>>(cfg.policy).alpha);
  EXPECT_EQ(*back.expected->t_con, *cfg.expected->t_con);
  EXPECT_EQ(simulate<double>(back).events.back().t, simulate<double>(cfg).events.back().t);
}

TEST(Schema, ScenarioRejectsMismatchedState) {
  auto j = io::to_json(example1_line(3, 1.0));
  j["x0"] = {0.0, 1.0};
  EXPECT_THROW(io::scenario_from_json(j), io::ParseError);
  j["x0"] = {0.0, 1.0, 2.0};
  j["horizon"] = -1.0;
  EXPECT_THROW(io::scenario_from_json(j), io::ParseError);
}

TEST(Trajectory, JsonRoundTrip) {
  const auto cfg = example1_line(5, 0.5);
  const auto traj = simulate<double>(cfg);
  const auto back = io::trajectory_from_json(io::parse_json(io::dump(io::to_json(traj))), cfg.quantizer);
  ASSERT_EQ(back.events.size(), traj.events.size());
  EXPECT_EQ(back.termination, traj.termination);
  for (std::size_t k = 0; k < traj.events.size(); ++k) {
    EXPECT_EQ(back.events[k].t, traj.events[k].t);
    EXPECT_EQ(back.events[k].kinds, traj.events[k].kinds);
    EXPECT_EQ(back.events[k].x, traj.events[k].x);
    EXPECT_EQ(back.events[k].z, traj.events[k].z);
    EXPECT_EQ(back.events[k].velocity, traj.events[k].velocity);
    EXPECT_EQ(back.events[k].role, traj.events[k].role);
  }
}

TEST(Trajectory, CsvLayout) {
  auto cfg = example1_line(3, 1.0);
  cfg.policy = SlidingPolicy{};
  const auto traj = simulate<double>(cfg);
  std::ostringstream out;
  io::write_trajectory_csv(out, traj);
  EXPECT_EQ(out.str(),
            "t,event,x_1,x_2,x_3,z_1,z_2,z_3,alpha_1,alpha_2,alpha_3\n"
            "0,start,0,1,2,0,1,2,,,\n"
            "0.5,threshold-hit+equilibrium,0.5,1,1.5,1,1,1,1,,0\n");

  std::ostringstream sampled;
  io::write_trajectory_csv(sampled, traj, 0.2);
  EXPECT_NE(sampled.str().find("0.2,sample,0.2,1,1.8,0,1,2,,,\n"), std::string::npos);
  EXPECT_NE(sampled.str().find("0.4,sample,"), std::string::npos);
}

TEST(Corpus, EveryScenarioLoadsAndConverges) {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(QCL_CORPUS_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    const auto cfg = io::load_scenario(entry.path().string());
    const auto traj = simulate<double>(cfg);
    EXPECT_TRUE(traj.certified_equilibrium()) << entry.path();
    EXPECT_TRUE(audit_trajectory(traj, cfg).ok()) << entry.path();
    if (cfg.expected && cfg.expected->t_con) {
      const auto c = convergence_time(traj, cfg.quantizer);
      ASSERT_TRUE(c);
      EXPECT_NEAR(c->t_con, *cfg.expected->t_con, 1e-9 * std::max(1.0, *cfg.expected->t_con)) << entry.path();
    }
  }
  EXPECT_GE(count, 8u);
}

TEST(Fixtures, CorruptedTrajectoryLoads) {
  const auto j = io::read_json_file(std::string(QCL_FIXTURE_DIR) + "/corrupted/corrupted_trajectory.json");
  const auto q = io::quantizer_from_json(j.at("quantizer"));
  const auto traj = io::trajectory_from_json(j.at("trajectory"), q);
  EXPECT_FALSE(envelopes(traj, q).ok());
}
