#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hmjacobi/cli.hpp"

using namespace hmjacobi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "hmjacobi");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

Json run_json(const std::vector<std::string>& args, int expect_code = 0) {
  const Outcome r = run(args);
  EXPECT_EQ(r.code, expect_code) << r.err;
  return Json::parse(r.out);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hmjacobi_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

}  // namespace

TEST(Cli, VerifyTheorem) {
  const Json j = run_json({"verify-theorem", "--phi", "circle:k=2", "--psi", "great-circle:k=1", "--field", "normal:m=1",
                           "--grid", "64"});
  EXPECT_LT(j["max_residual"].get<double>(), 1e-6);
  EXPECT_TRUE(j["pass"].get<bool>());
}

TEST(Cli, Spectrum) {
  const Json j = run_json({"spectrum", "--map", "great-circle:k=2", "--mmax", "8"});
  EXPECT_EQ(j["index"].get<int>(), 3);
  EXPECT_EQ(j["nullity"].get<int>(), 3);
  EXPECT_EQ(j["M_max"].get<int>(), 8);
  EXPECT_EQ(j["map"].get<std::string>(), "great-circle:k=2");
  EXPECT_EQ(j["eigenvalues"].size(), 34u);
  for (const char* key : {"map", "M_max", "eigenvalues", "index", "nullity", "zero_tolerance", "pass"})
    EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Cli, SpectrumCsv) {
  const Outcome r = run({"spectrum", "--map", "circle:k=1", "--mmax", "2", "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "mode_index,eigenvalue");
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 6);
  EXPECT_EQ(r.out.find('\r'), std::string::npos);
}

TEST(Cli, RigidityFit) {
  const Json j = run_json({"rigidity", "--phi", "hopf", "--field", "killing:z", "--fit"});
  EXPECT_LT(j["fit_residual"].get<double>(), 1e-8);
  EXPECT_EQ(j["generator"].size(), 9u);
  for (const char* key : {"jacobi_residual", "k_residual", "norm_variation", "projectability_residual", "in_J", "in_K", "in_H"})
    EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Cli, RigidityPerturbationIsRejected) {
  const Json j = run_json({"rigidity", "--phi", "hopf", "--field", "killing:z", "--fit", "--perturb", "0.01"}, 1);
  const double r = j["fit_residual"].get<double>();
  EXPECT_GE(r, 0.003);
  EXPECT_LE(r, 0.03);
  EXPECT_FALSE(j["pass"].get<bool>());
}

TEST(Cli, CorollaryEnergyToth) {
  const Json c = run_json({"corollary", "--phi", "circle:k=3", "--psi", "great-circle:k=2"});
  EXPECT_TRUE(c["pass"].get<bool>());
  const Json e = run_json({"energy", "--map", "great-circle:k=3", "--expect", "28.274333882308138"});
  EXPECT_NEAR(e["energy"].get<double>(), 9 * kPi, 1e-6);
  const Json t = run_json({"toth-check", "--phi", "identity:s2", "--field", "killing:z", "--grid", "16"});
  EXPECT_FALSE(t["in_H"].get<bool>());
  EXPECT_TRUE(t["pass"].get<bool>());  // verdicts agree
}

TEST(Cli, FailingCheckStillWritesTheReport) {
  const fs::path p = scratch("latitude.json");
  const Outcome r = run({"verify-theorem", "--phi", "great-circle:k=1", "--psi", "identity:s2", "--field", "killing:z",
                     "--output", p.string()});
  // a great circle is harmonic but not a harmonic morphism
  EXPECT_EQ(r.code, 1) << r.err;
  EXPECT_TRUE(r.out.empty());
  const Json j = Json::parse(slurp(p));
  EXPECT_FALSE(j["pass"].get<bool>());
}

TEST(Cli, EnergyMismatchFails) {
  const Json j = run_json({"energy", "--map", "great-circle:k=1", "--expect", "3.0"}, 1);
  EXPECT_FALSE(j["pass"].get<bool>());
}

TEST(Cli, ListExamples) {
  const Outcome r = run({"list-examples"});
  ASSERT_EQ(r.code, 0);
  for (const char* id : {"hopf", "circle:k=K", "great-circle:k=K", "zpow:k=K", "identity:sN", "latitude:theta=T", "torus-proj:i"})
    EXPECT_NE(r.out.find(id), std::string::npos) << id;
  const Json all = run_json({"list-examples", "--json"});
  ASSERT_TRUE(all.is_array());
  const Json morph = run_json({"list-examples", "--json", "--morphisms-only"});
  EXPECT_LT(morph.size(), all.size());
  for (const auto& e : morph) {
    EXPECT_EQ(e["id"].get<std::string>().rfind("latitude", 0), std::string::npos);
    EXPECT_TRUE(e["harmonic_morphism"].get<bool>());
  }
}

TEST(Cli, Errors) {
  const Outcome bad = run({"spectrum", "--map", "spiral:k=2"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("UnknownCatalogId"), std::string::npos) << bad.err;
  EXPECT_EQ(run({"spectrum"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"spectrum", "--map", "hopf"}).code, 2);
  EXPECT_EQ(run({"verify-theorem", "--phi", "hopf", "--psi", "identity:s2", "--field", "killing:z", "--grid", "2"}).code, 2);
  EXPECT_EQ(run({"spectrum", "--map", "circle:k=1", "--output", "/nonexistent/dir/x.json"}).code, 2);
}

TEST(Cli, ConfigFileAndOverrides) {
  const fs::path cfg = scratch("spectrum.cfg");
  write_text(cfg, "# spectrum of a double great circle\nmap = great-circle:k=2\nmmax = 6   # truncation\n\n");
  const Json j = run_json({"spectrum", "--config", cfg.string()});
  EXPECT_EQ(j["index"].get<int>(), 3);
  EXPECT_EQ(j["M_max"].get<int>(), 6);
  const Json o = run_json({"spectrum", "--config", cfg.string(), "--mmax", "9", "--map", "great-circle:k=1"});
  EXPECT_EQ(o["M_max"].get<int>(), 9);
  EXPECT_EQ(o["index"].get<int>(), 1);
}

TEST(Cli, ConfigParseErrorsCarryPosition) {
  const fs::path cfg = scratch("broken.cfg");
  write_text(cfg, "map = circle:k=1\n# fine\n  mmax 8\n");
  const Outcome r = run({"spectrum", "--config", cfg.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ConfigParseError"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find(cfg.string() + ":3:3"), std::string::npos) << r.err;
  try {
    config_arguments("ok = 1\nBad = 2\n", "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigParseError);
    EXPECT_NE(std::string(e.what()).find("x:2:1"), std::string::npos) << e.what();
  }
}

TEST(Cli, ToleranceTableIsReported) {
  const Json j = run_json({"spectrum", "--map", "circle:k=2", "--mmax", "4"});
  ASSERT_TRUE(j.contains("tolerances"));
  EXPECT_EQ(j["tolerances"]["symmetry"].get<double>(), 1e-10);
}

#ifdef HMJACOBI_CLI_PATH
TEST(Cli, BinaryReportsAreByteIdentical) {
  const std::string bin = HMJACOBI_CLI_PATH;
  const std::vector<std::string> scenarios = {
      "spectrum --map great-circle:k=3 --mmax 10",
      "verify-theorem --phi hopf --psi identity:s2 --field killing:x --grid 8",
      "rigidity --phi hopf --field killing:y --fit --grid 8"};
  int n = 0;
  for (const auto& s : scenarios) {
    const fs::path a = scratch("a" + std::to_string(n) + ".json"), b = scratch("b" + std::to_string(n) + ".json");
    ++n;
    ASSERT_EQ(std::system((bin + " " + s + " --output " + a.string()).c_str()), 0) << s;
    ASSERT_EQ(std::system(("HMJACOBI_THREADS=1 " + bin + " " + s + " --output " + b.string()).c_str()), 0) << s;
    const std::string ta = slurp(a);
    EXPECT_FALSE(ta.empty());
    EXPECT_EQ(ta, slurp(b)) << s;
  }
}
#endif
