#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "lddl/error.hpp"
#include "lddl/workload.hpp"

using namespace lddl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lddl_wl_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("emulator config validation") {
  EmulatorConfig c;
  c.eta = 2.0;
  c.dt = 1.0;
  try {
    emulate_inference(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "eta");
  }
  EmulatorConfig a;
  a.alpha2 = 0.0;
  CHECK_THROWS_AS(validate(a), ConfigError);
  EmulatorConfig g;
  g.gamma = 0.0;
  CHECK_THROWS_AS(validate(g), ConfigError);
}

TEST_CASE("no arrivals: idle baseline and cooling fixed point") {
  EmulatorConfig c;
  c.eta = 0.0;
  c.steps = 400;
  c.alpha2 = 0.1;
  const auto tr = emulate_inference(c);
  const double base = c.p_idle * static_cast<double>(c.racks * c.servers_per_rack);
  for (double p : tr.p_ai) CHECK(p == doctest::Approx(base));
  CHECK(tr.jobs.empty());
  CHECK(tr.p_cool.back() == doctest::Approx(c.alpha1 * base).epsilon(1e-9));
}

TEST_CASE("saturation reaches the power ceiling") {
  EmulatorConfig c;
  c.eta = 1.0;
  c.dt = 1.0;
  c.gamma = 1e6;
  c.gamma1 = 0.0;
  c.steps = 100;
  const auto tr = emulate_inference(c);
  const double ceiling =
      static_cast<double>(c.racks * c.servers_per_rack) * (c.p_idle + c.p_peak);
  CHECK(tr.p_ai.back() == doctest::Approx(ceiling));
  CHECK(tr.jobs.size() == c.servers_per_rack);
}

TEST_CASE("trace invariants") {
  EmulatorConfig c;
  c.steps = 1500;
  c.eta = 0.3;
  c.seed = 5;
  const auto tr = emulate_inference(c);
  REQUIRE(tr.p_ai.size() == c.steps);
  CHECK(tr.p_cool.size() == c.steps);
  CHECK(tr.p_lddl.size() == c.steps);
  double pc = 0.0;
  for (std::size_t k = 0; k < c.steps; ++k) {
    CHECK(tr.p_lddl[k] == tr.p_ai[k] + tr.p_cool[k]);
    pc = cooling_step(pc, tr.p_ai[k], c.alpha1, c.alpha2);
    CHECK(tr.p_cool[k] == pc);
  }
  for (const auto& j : tr.jobs) {
    CHECK(j.duration >= 0.0);
    CHECK(j.server < c.servers_per_rack);
  }
}

TEST_CASE("determinism and seed sensitivity") {
  EmulatorConfig c;
  c.steps = 800;
  c.eta = 0.4;
  c.seed = 99;
  TempDir tmp;
  write_trace_csv(emulate_inference(c), tmp.path / "a.csv");
  write_trace_csv(emulate_inference(c), tmp.path / "b.csv");
  CHECK(slurp(tmp.path / "a.csv") == slurp(tmp.path / "b.csv"));
  c.seed = 100;
  write_trace_csv(emulate_inference(c), tmp.path / "c.csv");
  CHECK(slurp(tmp.path / "a.csv") != slurp(tmp.path / "c.csv"));
}

TEST_CASE("job durations follow the configured normal") {
  EmulatorConfig c;
  c.steps = 40000;
  c.eta = 0.5;
  c.servers_per_rack = 256;
  c.gamma = 30.0;
  c.gamma1 = 5.0;
  c.seed = 3;
  const auto tr = emulate_inference(c);
  REQUIRE(tr.jobs.size() >= 10000);
  double sum = 0.0;
  for (const auto& j : tr.jobs) sum += j.duration;
  const double mean = sum / static_cast<double>(tr.jobs.size());
  const double se = c.gamma1 / std::sqrt(static_cast<double>(tr.jobs.size()));
  CHECK(std::abs(mean - c.gamma) <= 3.0 * se);
}

TEST_CASE("cooling step") {
  CHECK(cooling_step(3.0, 100.0, 0.15, 1.0) == doctest::Approx(15.0));
  CHECK(cooling_step(15.0, 100.0, 0.15, 0.3) == doctest::Approx(15.0));
  CHECK(cooling_step(0.0, 100.0, 0.15, 0.1) == doctest::Approx(1.5));
}

TEST_CASE("cooling settles geometrically") {
  // Relative error after n steps from zero is (1 - alpha2)^n.
  for (double a2 : {0.05, 0.1, 0.2, 0.5, 0.9}) {
    double pc = 0.0;
    for (int n = 1; n <= 40; ++n) {
      pc = cooling_step(pc, 80.0, 0.15, a2);
      CHECK((12.0 - pc) / 12.0 == doctest::Approx(std::pow(1.0 - a2, n)).epsilon(1e-9));
    }
  }
  // The 0.1% band after 5/alpha2 steps needs alpha2 >= 0.5.
  for (double a2 : {0.5, 1.0}) {
    double pc = 0.0;
    for (int i = 0; i < static_cast<int>(std::ceil(5.0 / a2)); ++i)
      pc = cooling_step(pc, 80.0, 0.15, a2);
    CHECK(std::abs(pc - 12.0) / 12.0 < 1e-3);
  }
}

TEST_CASE("profile ingestion") {
  TempDir tmp;
  SUBCASE("valid") {
    const auto p = load_profile(
        write_file(tmp.path / "ok.csv", "time_s,power\n0,1.0\n1,2.0\n2,1.5\n"),
        PowerUnit::pu);
    CHECK(p.size() == 3);
    CHECK(p.at(1.5) == 2.0);
    CHECK(p.at(-1.0) == 1.0);
    CHECK(p.mean() == doctest::Approx(1.5));
  }
  SUBCASE("duplicated timestamp") {
    try {
      load_profile(write_file(tmp.path / "dup.csv", "t,p\n0,1\n1,2\n1,3\n"),
                   PowerUnit::pu);
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.line() == 4);
    }
  }
  SUBCASE("negative power") {
    try {
      load_profile(write_file(tmp.path / "neg.csv", "t,p\n0,1\n1,-2\n"),
                   PowerUnit::pu);
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("unparseable") {
    CHECK_THROWS_AS(load_profile(write_file(tmp.path / "x.csv", "t,p\n0,abc\n"),
                                 PowerUnit::pu),
                    IngestError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_profile(tmp.path / "none.csv", PowerUnit::pu), IoError);
  }
  SUBCASE("kW to per unit") {
    const auto p = load_profile(
        write_file(tmp.path / "kw.csv", "t,p\n0,50000\n1,12345\n"), PowerUnit::kw,
        100.0);
    CHECK(p.unit == PowerUnit::pu);
    CHECK(p.value[0] == doctest::Approx(0.5));
    CHECK(p.value[1] == doctest::Approx(12345.0 / 1e5));
  }
  SUBCASE("round trip") {
    LoadProfile p{{0.0, 0.5, 1.25}, {0.1, 1.0 / 3.0, 2.0}, PowerUnit::pu};
    write_profile_csv(p, tmp.path / "rt.csv");
    const auto q = load_profile(tmp.path / "rt.csv", PowerUnit::pu);
    CHECK(q.t == p.t);
    CHECK(q.value == p.value);
  }
}

TEST_CASE("fluctuation scaling") {
  const LoadProfile p{{0, 1, 2, 3}, {1.0, 3.0, 2.0, 2.0}, PowerUnit::pu};
  const auto same = transform_profile(p, 1.0);
  CHECK(same.value == p.value);

  const auto amp = transform_profile(p, 1.6);
  CHECK(amp.mean() == doctest::Approx(p.mean()));
  CHECK(amp.value[0] == doctest::Approx(2.0 + 1.6 * (1.0 - 2.0)));

  const auto back = transform_profile(amp, 1.0 / 1.6);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(back.value[i] == doctest::Approx(p.value[i]).epsilon(1e-14));

  const auto flat = constant_profile(0.7, 10.0);
  for (double v : transform_profile(flat, 3.0).value) CHECK(v == 0.7);

  CHECK_THROWS_AS(transform_profile(p, 0.0), DomainError);
  CHECK_THROWS_AS(transform_profile(p, 10.0), DomainError);
}

TEST_CASE("resampling") {
  const LoadProfile p{{0.0, 1.0}, {1.0, 3.0}, PowerUnit::pu};
  ResampleSpec lin{0.5, HoldPolicy::linear, std::nullopt, std::nullopt};
  const auto r = resample_profile(p, lin);
  REQUIRE(r.size() == 3);
  CHECK(r.value[1] == doctest::Approx(2.0));

  ResampleSpec zoh{0.5, HoldPolicy::zero_order, std::nullopt, std::nullopt};
  CHECK(resample_profile(p, zoh).value[1] == 1.0);

  ResampleSpec out{0.5, HoldPolicy::linear, 0.0, 2.0};
  CHECK_THROWS_AS(resample_profile(p, out), DomainError);
  ResampleSpec bad{0.0, HoldPolicy::linear, std::nullopt, std::nullopt};
  CHECK_THROWS_AS(resample_profile(p, bad), DomainError);
}

TEST_CASE("units") {
  CHECK(parse_unit("kW") == PowerUnit::kw);
  CHECK(parse_unit("pu") == PowerUnit::pu);
  CHECK(!parse_unit("MW"));
  CHECK(std::string(to_string(PowerUnit::kw)) == "kW");
}
