#include "tempspy/experiment.hpp"
#include "tempspy/serialize.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace tempspy;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) { return run_config_from(KeyValueConfig::from_string(text)); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliRun : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("tempspy_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
           std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir / name;
    std::ofstream(p) << text;
    return p;
  }

  int run(const std::string& args) {
    const std::string cmd = std::string(TEMPSPY_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() +
                            " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

const char* kSmallConfig = R"(master_seed = 7
[enroll]
region_size = 256KiB
temps = 20:2.5:70
decay_time_s = 240
[fit]
segments = 20:5:70
[attack]
scenario = constant-40
device_lag_tau_s = 180
)";

}  // namespace

TEST(RegionSize, Units) {
  EXPECT_EQ(parse_region_size_bits("2MiB"), 16ULL << 20);
  EXPECT_EQ(parse_region_size_bits("512KiB"), 4ULL << 20);
  EXPECT_EQ(parse_region_size_bits("256KiBit"), 256ULL << 10);
  EXPECT_EQ(parse_region_size_bits("1MiBit"), 1ULL << 20);
  EXPECT_EQ(parse_region_size_bits("4096"), 4096u);
  EXPECT_EQ(parse_region_size_bits("16B"), 128u);
  EXPECT_THROW(parse_region_size_bits("2 MiB"), ConfigError);
  EXPECT_THROW(parse_region_size_bits("MiB"), ConfigError);
  EXPECT_THROW(parse_region_size_bits("0KiB"), ConfigError);
  EXPECT_THROW(parse_region_size_bits("2TiB"), ConfigError);
}

TEST(NumberList, RangesAndLists) {
  const auto g = parse_number_list("x", "0:2.5:70");
  ASSERT_EQ(g.size(), 29u);
  EXPECT_DOUBLE_EQ(g.back(), 70.0);
  EXPECT_EQ(parse_number_list("x", "1, 2 ,3.5"), (std::vector<double>{1, 2, 3.5}));
  EXPECT_THROW(parse_number_list("x", "1:0:3"), ConfigError);
  EXPECT_THROW(parse_number_list("x", "1:2"), ConfigError);
  EXPECT_THROW(parse_number_list("x", "1,abc"), ConfigError);
}

TEST(RunConfigParse, DefaultsAndOverrides) {
  const auto rc = parse("[enroll]\nregion_size = 2MiB\n");
  EXPECT_EQ(rc.master_seed, 1u);
  EXPECT_EQ(rc.region_size_bits, 16ULL << 20);
  EXPECT_EQ(rc.enroll_temps.size(), 29u);
  EXPECT_DOUBLE_EQ(rc.enroll_decay_time_s, 240.0);
  EXPECT_EQ(rc.segments, (std::vector<double>{0, 25, 45, 70}));
  EXPECT_DOUBLE_EQ(rc.model.k_true, 0.07);
  EXPECT_FALSE(rc.cover_enabled);

  const auto o = parse(
      "master_seed = 99\n[model]\nnoise_sigma = 0\n[enroll]\nregion_size = 1MiBit\nmode = simulated-by-decay-time\n"
      "temps = 20:1:40\n[attack]\nmode = indicator\nl = 3\nsame_device = false\nspy_retention_scale = 0.8\n"
      "[cover]\nenabled = true\nslope_gain = 1.3\n[policy]\nrefresh_locked = true\npathway = sleep\n");
  EXPECT_EQ(o.master_seed, 99u);
  EXPECT_DOUBLE_EQ(o.model.noise_sigma, 0.0);
  EXPECT_EQ(o.enroll_mode, EnrollmentMode::simulated_by_decay_time);
  EXPECT_EQ(o.enroll_temps.size(), 21u);
  EXPECT_TRUE(o.indicator_mode);
  EXPECT_EQ(o.l, 3u);
  EXPECT_FALSE(o.same_device);
  EXPECT_DOUBLE_EQ(o.spy_retention_scale, 0.8);
  EXPECT_TRUE(o.cover_enabled);
  EXPECT_DOUBLE_EQ(o.cover.slope_gain, 1.3);
  EXPECT_DOUBLE_EQ(o.cover.offset_c, 2.0);
  EXPECT_TRUE(o.policy.refresh_locked);
  EXPECT_EQ(o.pathway, MeasurePathway::sleep_mode);
}

TEST(RunConfigParse, ErrorsNameTheField) {
  auto field_of = [](const std::string& text) {
    try {
      parse(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(field_of("master_seed = 1\n").find("enroll.region_size"), std::string::npos);
  EXPECT_NE(field_of("[enroll]\nregion_size = 2MiB\nmode = sideways\n").find("enroll.mode"), std::string::npos);
  EXPECT_NE(field_of("[enroll]\nregion_size = 2MiB\n[attack]\nmode = magic\n").find("attack.mode"), std::string::npos);
  EXPECT_NE(field_of("[enroll]\nregion_size = 2MiB\n[cover]\nslope_gain = 0\n").find("cover.slope_gain"),
            std::string::npos);
  EXPECT_NE(field_of("[enroll]\nregion_size = 2MiB\n[attack]\nscenario_file = /nonexistent/x.csv\n")
                .find("attack.scenario_file"),
            std::string::npos);
  EXPECT_THROW(KeyValueConfig::from_string("[broken\n"), ConfigError);
}

TEST(RunConfigParse, SampleConfigLoads) {
  const auto rc = load_run_config(TEMPSPY_DATA_DIR "/sample.conf");
  EXPECT_EQ(rc.region_size_bits, 16ULL << 20);
  EXPECT_EQ(rc.scenario_name, "chamber-ramp");
  EXPECT_FALSE(rc.config_digest.empty());
}

TEST(Seeds, NamedStreamsDoNotCollide) {
  RunConfig rc;
  rc.enroll_repeats = 3;
  const auto s0 = enroll_seeds(rc, 0), s1 = enroll_seeds(rc, 1);
  for (auto a : s0)
    for (auto b : s1) EXPECT_NE(a, b);
  EXPECT_NE(derive_seed(1, "array", 0), derive_seed(1, "spy", 0));
  EXPECT_EQ(s0, enroll_seeds(rc, 0));
}

TEST(Serialize, TableRoundTrip) {
  const auto a = CellArray::build(3, 1 << 16, ModelParams{});
  const auto t = enroll_real(a, std::vector<double>{40, 50, 60}, 240, std::vector<std::uint64_t>{1, 2});
  const ArtifactMeta meta{"1.0.0", 42, "abcd"};
  std::stringstream ss;
  write_json(ss, table_to_json(t, meta));
  const auto j = read_json(ss, "table");
  const auto back = table_from_json(j);
  EXPECT_EQ(document_meta(j), meta);
  ASSERT_EQ(back.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.records[i].flip_count, t.records[i].flip_count);
    EXPECT_EQ(back.records[i].repeat_counts, t.records[i].repeat_counts);
    EXPECT_EQ(*back.records[i].bitmap, *t.records[i].bitmap);
  }
  std::stringstream again;
  write_json(again, table_to_json(back, meta));
  std::stringstream first;
  write_json(first, table_to_json(t, meta));
  EXPECT_EQ(again.str(), first.str());
}

TEST(Serialize, ModelAndIndicatorRoundTrip) {
  ApproxModel m;
  m.segments = {{10, 30, 5.0, 1e-3}, {30, 60, 12.0, 2e-4}};
  m.decay_time_s = 240;
  m.p = 1.2345678901234567;
  const ArtifactMeta meta{"1.0.0", 1, "d"};
  const auto mb = model_from_json(model_to_json(m, meta));
  EXPECT_EQ(mb.segments.size(), 2u);
  EXPECT_EQ(mb.segments[1].c2, m.segments[1].c2);
  EXPECT_EQ(mb.p, m.p);

  const auto a = CellArray::build(4, 16ULL << 20, ModelParams{});
  const auto set = select_indicator_cells(enroll_real(a, std::vector<double>{30, 31, 32}, 120, std::vector<std::uint64_t>{1}), 3);
  const auto sb = indicators_from_json(indicators_to_json(set, meta));
  EXPECT_EQ(sb.steps, set.steps);
  EXPECT_EQ(sb.temps, set.temps);
}

TEST(Serialize, VersionAndFormatChecks) {
  ApproxModel m;
  m.segments = {{10, 30, 5.0, 1e-3}};
  auto j = model_to_json(m, {});
  j["version"] = 2;
  EXPECT_THROW(model_from_json(j), VersionError);
  j = model_to_json(m, {});
  EXPECT_THROW(table_from_json(j), ArgumentError);
  std::stringstream junk("{ not json");
  EXPECT_THROW(read_json(junk, "model"), ArgumentError);
}

TEST_F(CliRun, EnrollWritesFullGridTable) {
  const auto cfg = write("run.conf", "[enroll]\nregion_size = 256KiB\ntemps = 0:2.5:70\ndecay_time_s = 240\n");
  ASSERT_EQ(run("enroll --config " + cfg.string() + " --out " + (dir / "t.json").string() + " --csv " +
                (dir / "t.csv").string()),
            0);
  std::ifstream in(dir / "t.json");
  const auto t = table_from_json(read_json(in, "table"));
  EXPECT_EQ(t.records.size(), 29u);
  EXPECT_EQ(t.mode, EnrollmentMode::real_temperature);
  EXPECT_NE(slurp(dir / "stdout.txt").find("records 29"), std::string::npos);
  const auto csv = slurp(dir / "t.csv");
  EXPECT_EQ(csv.rfind("# ", 0), 0u);
  EXPECT_NE(csv.find("master_seed=1"), std::string::npos);
}

TEST_F(CliRun, EnrollSimulatedMode) {
  const auto cfg = write("run.conf",
                         "[enroll]\nregion_size = 256KiB\nmode = simulated-by-decay-time\ntemps = 20:1:40\n"
                         "at_temp_c = 25\ndecay_time_s = 120\n");
  ASSERT_EQ(run("enroll --config " + cfg.string() + " --out " + (dir / "t.json").string()), 0);
  std::ifstream in(dir / "t.json");
  const auto t = table_from_json(read_json(in, "table"));
  EXPECT_EQ(t.mode, EnrollmentMode::simulated_by_decay_time);
  ASSERT_EQ(t.records.size(), 21u);
  EXPECT_NEAR(*t.enroll_temp_c, 25.0, 1e-12);
  EXPECT_NEAR(t.records.front().decay_time_s, 120 * std::exp(0.07 * -5), 1e-6);
}

TEST_F(CliRun, ExitCodes) {
  EXPECT_EQ(run("enroll --config " + write("bad.conf", "master_seed = 3\n").string() + " --out x.json"), 2);
  EXPECT_NE(slurp(dir / "stderr.txt").find("enroll.region_size"), std::string::npos);
  EXPECT_EQ(run("enroll --config /nonexistent.conf --out x.json"), 2);
  EXPECT_EQ(run("frobnicate"), 2);

  const auto tiny = write("tiny.conf", "[enroll]\nregion_size = 256KiB\ntemps = 40,50\n");
  ASSERT_EQ(run("enroll --config " + tiny.string() + " --out " + (dir / "t.json").string()), 0);
  EXPECT_EQ(run("fit --table " + (dir / "t.json").string() + " --segments 40,45,50 --out " + (dir / "m.json").string()),
            3);

  const auto locked = write("locked.conf", std::string(kSmallConfig) + "[policy]\nrefresh_locked = true\n");
  EXPECT_EQ(run("attack --config " + locked.string() + " --out " + (dir / "trace.csv").string()), 4);
  EXPECT_NE(slurp(dir / "stderr.txt").find("refresh is locked"), std::string::npos);
}

TEST_F(CliRun, DecodeCounts) {
  const auto cfg = write("run.conf", kSmallConfig);
  ASSERT_EQ(run("enroll --config " + cfg.string() + " --out " + (dir / "t.json").string()), 0);
  ASSERT_EQ(run("fit --table " + (dir / "t.json").string() + " --config " + cfg.string() + " --out " +
                (dir / "m.json").string()),
            0);
  std::ifstream tin(dir / "t.json");
  const auto t = table_from_json(read_json(tin, "table"));
  std::ifstream min(dir / "m.json");
  const auto m = model_from_json(read_json(min, "model"));
  const auto& rec = t.records[8];  // 40 C
  ASSERT_EQ(run("decode --model " + (dir / "m.json").string() + " --count " + std::to_string(rec.flip_count)), 0);
  const auto out = slurp(dir / "stdout.txt");
  EXPECT_NE(out.find(format_temp(approx_temperature(m, static_cast<double>(rec.flip_count)))), std::string::npos);
}

TEST_F(CliRun, AttackIsByteIdenticalAcrossRuns) {
  const auto cfg = write("run.conf", kSmallConfig);
  for (const char* name : {"a", "b"})
    ASSERT_EQ(run("attack --config " + cfg.string() + " --out " + (dir / (std::string(name) + ".csv")).string() +
                  " --model-out " + (dir / (std::string(name) + ".json")).string()),
              0);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  EXPECT_NE(slurp(dir / "a.csv").find("master_seed=7"), std::string::npos);

  ASSERT_EQ(run("attack --config " + cfg.string() + " --seed 8 --out " + (dir / "c.csv").string()), 0);
  EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
}
