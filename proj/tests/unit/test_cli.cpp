#include <sys/wait.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "ifx/common.hpp"

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(IFX_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path setup(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ifx_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  ifx::write_file_atomic(dir / "registry.csv", ifx::testing::synth_registry(3));
  ifx::write_file_atomic(dir / "run.ini",
                         "[run]\nprofile = tiny\n"
                         "[paths]\nregistry = registry.csv\ncorpus_dir = corpus\noutput_dir = out\n"
                         "[data]\nsentences = 160\neval_sentences = 30\ntokenizer_vocab = 250\n"
                         "[model]\nd_model = 8\nn_heads = 2\nd_ffn = 16\nmax_len = 16\n"
                         "[train]\ntotal_steps = 10\nwarmup_steps = 2\nbatch_size = 4\n");
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  const auto dir = setup("usage");
  const std::string cfg = " -c " + (dir / "run.ini").string();
  CHECK(cli("") == 2);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("analyze --bogus" + cfg) == 2);
  CHECK(cli("analyze -c /nonexistent.ini") == 2);
  CHECK(cli("analyze" + cfg + " --set train.nope=1") == 2);
  CHECK(cli("--help") == 0);
}

TEST_CASE("pipeline end to end") {
  const auto dir = setup("e2e");
  const std::string cfg = " -c " + (dir / "run.ini").string();
  REQUIRE(cli("gen-corpus" + cfg) == 0);
  CHECK(fs::exists(dir / "corpus" / "l0_Latn.train.txt"));
  REQUIRE(cli("train-tokenizer" + cfg) == 0);
  CHECK(fs::exists(dir / "out" / "vocab.txt"));
  REQUIRE(cli("sweep plan" + cfg) == 0);
  CHECK(cli("sweep plan" + cfg) == 1);
  CHECK(cli("sweep run" + cfg + " --inject-nan bi:l0_Latn+l1_Cyrl --inject-step 3") == 1);
  CHECK(cli("analyze" + cfg) == 0);
  CHECK(cli("sweep resume" + cfg) == 0);
  CHECK(cli("sweep run" + cfg + " --set train.peak_lr=0.5") == 1);

  REQUIRE(cli("analyze" + cfg) == 0);
  for (const char* f : {"loss_matrix.csv", "interference_matrix.csv", "robustness.csv",
                        "friendliness.csv", "outliers.json"}) {
    CHECK(fs::exists(dir / "out" / "analysis" / f));
  }
  REQUIRE(cli("report" + cfg) == 0);
  const auto svg = ifx::read_file(dir / "out" / "report" / "interference_heatmap.svg");
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  CHECK_NOTHROW(boost::property_tree::read_xml(in, tree));
  CHECK(fs::exists(dir / "out" / "report" / "summary.json"));
  CHECK(cli("similarity" + cfg) == 0);
  CHECK(fs::exists(dir / "out" / "analysis" / "similarity" / "row_correlations.csv"));
}
