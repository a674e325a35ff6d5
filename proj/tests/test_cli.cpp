#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "annpricer/bs_oracle.hpp"
#include "annpricer/network.hpp"
#include "doctest.h"

using namespace annp;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::current_path() / "cli_work";

int run(const std::string& args) {
  const std::string cmd = std::string("cd '") + kWork.string() + "' && '" ANNPRICER_CLI_PATH "' " + args +
                          " > last.out 2> last.err";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(kWork / p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void prepare() {
  static bool done = false;
  if (done) return;
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  REQUIRE(run("generate --n 4000 --seed 5 --out data.csv") == 0);
  done = true;
}

Network affine(int sigma_weight_input, double w, double bias, ScalingMeta::Kind kind) {
  Network net({5, 1}, {Activation::leaky_relu(1.0)});
  net.parameters().setZero();
  if (sigma_weight_input >= 0) net.weights(0)(0, sigma_weight_input) = w;
  net.bias(0)(0) = bias;
  net.scaling.kind = kind;
  net.scaling.atm_band = 1e-3;
  return net;
}

}  // namespace

TEST_CASE("generate: sidecars, determinism and config errors") {
  prepare();
  CHECK(fs::exists(kWork / "data.csv.meta.json"));
  CHECK(fs::exists(kWork / "data.csv.config"));
  CHECK(slurp("data.csv.meta.json").find("\"kept\"") != std::string::npos);
  const auto first = slurp("data.csv");
  REQUIRE(run("generate --n 4000 --seed 5 --out again.csv") == 0);
  CHECK(slurp("again.csv") == first);
  CHECK(run("generate --n 0 --out zero.csv") == 2);
  CHECK(run("generate --n 10 --sigma-min 0.9 --sigma-max 0.1 --out bad.csv") == 2);
  CHECK(run("frobnicate") == 2);
}

TEST_CASE("train: outputs, determinism and exit codes") {
  prepare();
  REQUIRE(run("train --data data.csv --epochs 2 --out a.model") == 0);
  REQUIRE(run("train --data data.csv --epochs 2 --out b.model") == 0);
  CHECK(slurp("a.model") == slurp("b.model"));
  CHECK(slurp("a.model.metrics.csv") == slurp("b.model.metrics.csv"));
  CHECK(fs::exists(kWork / "a.model.eval.txt"));
  CHECK(slurp("a.model.config").find("epochs=2") != std::string::npos);

  // The written config reproduces the run.
  REQUIRE(run("train --config a.model.config --out c.model") == 0);
  CHECK(slurp("c.model") == slurp("a.model"));

  REQUIRE(run("train --data data.csv --epochs 1 --lambda 1,1,1 --m 4 --init-model a.model --out p.model") == 0);
  CHECK(slurp("p.model.eval.txt").find("P10") != std::string::npos);

  CHECK(run("train --data missing.csv --out x.model") == 1);
  std::ofstream(kWork / "bad.cfg") << "epochz=3\n";
  CHECK(run("train --config bad.cfg --data data.csv --out x.model") == 2);
  CHECK(run("train --data data.csv --epochs 0 --out x.model") == 2);
  CHECK(run("train --data data.csv --optimizer sgd --out x.model") == 2);
}

TEST_CASE("train: divergence exits with code 3") {
  prepare();
  auto net = Network::pricing_architecture();
  net.initialize(1);
  net.parameters().array() *= 1e300;
  save_model(net, kWork / "blowup.model");
  CHECK(run("train --data data.csv --epochs 1 --init-model blowup.model --out d.model") == 3);
  CHECK(slurp("last.err").find("clip") != std::string::npos);
}

TEST_CASE("report: arbitrage, scatter and density files") {
  prepare();
  REQUIRE(run("train --data data.csv --epochs 1 --out r.model") == 0);
  REQUIRE(run("report --data data.csv --model r.model --out rep") == 0);
  for (const char* f : {"rep.arbitrage.csv", "rep.scatter.csv", "rep.density.csv", "rep.summary.txt", "rep.config"}) {
    CHECK(fs::exists(kWork / f));
  }
  CHECK(slurp("rep.scatter.csv").rfind("split,y_true,y_pred\n", 0) == 0);
  const auto arb = slurp("rep.arbitrage.csv");
  CHECK(arb.find("in_sample") != std::string::npos);
  CHECK(arb.find("out_of_sample") != std::string::npos);
  REQUIRE(run("report --data data.csv --model r.model --out rep2") == 0);
  CHECK(slurp("rep2.arbitrage.csv") == arb);

  REQUIRE(run("report --data data.csv --oracle --out orc") == 0);
  CHECK(slurp("orc.summary.txt").find("  P          0\n") != std::string::npos);
  CHECK(run("report --data data.csv --model none.model --out x") == 1);
}

TEST_CASE("calibrate: warnings and degenerate quote sets") {
  prepare();
  save_model(affine(-1, 0.0, 0.8, ScalingMeta::Kind::Inverse), kWork / "inv.model");
  save_model(affine(4, 0.5, 0.0, ScalingMeta::Kind::Direct), kWork / "dir.model");
  {
    std::ofstream q(kWork / "quotes.csv");
    q << "S,r,q,T,K,C_market\n";
    for (double K : {9.0, 10.0, 11.0}) q << "12,0.01,0," << 1.0 << ',' << K << ',' << bs_call(12, K, 1.0, 0.01, 0, 0.3) << '\n';
    q << "12,0.01,0,1,12," << bs_call(12, 12, 1.0, 0.01, 0, 0.3) << '\n';
  }
  REQUIRE(run("calibrate --inverse-model inv.model --direct-model dir.model --quotes quotes.csv --out cal") == 0);
  const auto summary = slurp("cal.summary.txt");
  CHECK(summary.find("warnings    1") != std::string::npos);
  CHECK(summary.find("quotes_used 3 of 4") != std::string::npos);
  CHECK(slurp("cal.quotes.csv").find("excluded_atm") != std::string::npos);
  const auto rows = slurp("cal.quotes.csv");
  REQUIRE(run("calibrate --inverse-model inv.model --direct-model dir.model --quotes quotes.csv --out cal") == 0);
  CHECK(slurp("cal.quotes.csv") == rows);

  std::ofstream(kWork / "empty.csv") << "S,r,q,T,K,C_market\n";
  CHECK(run("calibrate --inverse-model inv.model --direct-model dir.model --quotes empty.csv --out e") == 4);
  std::ofstream(kWork / "atm.csv") << "S,r,q,T,K,C_market\n12,0.01,0,1,12,1.5\n";
  CHECK(run("calibrate --inverse-model inv.model --direct-model dir.model --quotes atm.csv --out e") == 4);
  CHECK(run("calibrate --inverse-model nope.model --direct-model dir.model --quotes quotes.csv --out e") == 1);
}

TEST_CASE("reproduce-table1 writes a row per lambda") {
  prepare();
  REQUIRE(run("reproduce-table1 --data data.csv --epochs 1 --lambdas 0,10 --out t1") == 0);
  const auto csv = slurp("t1.csv");
  CHECK(csv.rfind("lambda,in_sample_P10,in_mse_bps,in_mean_pct,out_sample_P10,out_mse_bps\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(fs::exists(kWork / "t1.lambda0.model"));
  CHECK(fs::exists(kWork / "t1.lambda10.model"));
}
