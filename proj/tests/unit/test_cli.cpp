#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "rot/binio.hpp"
#include "rot/cli.hpp"
#include "rot/error.hpp"
#include "rot/reading.hpp"
#include "support.hpp"

using namespace rot;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result rot_cmd(std::vector<std::string> args) {
  args.insert(args.begin(), "rot");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> small(const std::string& dir, std::vector<std::string> more = {}) {
  std::vector<std::string> a = {"--depth", "3", "--hidden", "16", "--heads", "2", "--context", "512",
                                "--n-samples", "8", "--layers", "last:2", "--out", dir};
  a.insert(a.end(), more.begin(), more.end());
  return a;
}

Result rot_small(std::vector<std::string> head, const std::string& dir, std::vector<std::string> more = {}) {
  // shared flags first so the case-specific ones win
  std::vector<std::string> args = {head.front()};
  const auto shared = small(dir);
  args.insert(args.end(), shared.begin(), shared.end());
  args.insert(args.end(), head.begin() + 1, head.end());
  args.insert(args.end(), more.begin(), more.end());
  return rot_cmd(args);
}

std::vector<unsigned char> bytes(const std::string& p) { return binio::read_file(p); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("read writes a loadable, deterministic ROTV") {
    const auto a = testing::scratch("cli-read-a"), b = testing::scratch("cli-read-b");
    auto r = rot_small({"read", "--task", "coin-parity", "--workers", "1"}, a);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("explained") != std::string::npos);
    const auto set = reading::load_reading_vectors(a + "/readers.rotv");
    CHECK(set.layers() == std::vector<int>{2, 3});
    for (int k : set.layers()) CHECK(std::abs(linalg::norm(set.at(k)) - 1.0) < 1e-9);
    r = rot_small({"read", "--task", "coin-parity", "--workers", "4"}, b);
    REQUIRE(r.code == 0);
    CHECK(bytes(a + "/readers.rotv") == bytes(b + "/readers.rotv"));
  }

  TEST_CASE("exit codes") {
    const auto d = testing::scratch("cli-exit");
    CHECK(rot_small({"read", "--task", "coin-parity", "--n-samples", "5000"}, d).code == 3);
    CHECK(rot_small({"read", "--task", "coin-parity", "--layers", "2,9"}, d).code == 5);
    CHECK(rot_small({"read", "--task", "coin-parity", "--layers", "last:x"}, d).code == 2);
    CHECK(rot_small({"read", "--task", "coin-parity", "--select", "median"}, d).code == 2);
    CHECK(rot_small({"read", "--task", "no-such-task"}, d).code == 4);
    CHECK(rot_small({"localize", "--readers", d + "/missing.rotv", "--prompt", "A coin"}, d).code == 4);
    CHECK(rot_small({"steer", "--readers", d + "/missing.rotv", "--prompt", "A coin"}, d).code == 4);
    CHECK(rot_cmd({"frobnicate"}).code == 2);
    binio::write_text(d + "/junk.rotd", "RXTD garbage");
    auto r = rot_cmd({"inspect", d + "/junk.rotd"});
    CHECK(r.code == 6);
    CHECK(r.err.find("error:") != std::string::npos);
    binio::write_text(d + "/junk.rotv", "ROTV");
    CHECK(rot_small({"localize", "--readers", d + "/junk.rotv", "--prompt", "A coin"}, d).code == 6);
  }

  TEST_CASE("readers from a different model width are a mismatch") {
    const auto d = testing::scratch("cli-mismatch");
    REQUIRE(rot_small({"read", "--task", "coin-parity"}, d).code == 0);
    auto r = rot_cmd({"localize", "--readers", d + "/readers.rotv", "--prompt", "A coin is heads up .",
                      "--response", "yes", "--depth", "3", "--hidden", "32", "--heads", "2", "--out", d});
    CHECK(r.code == 5);
    r = rot_cmd({"localize", "--readers", d + "/readers.rotv", "--prompt", "A coin is heads up .",
                 "--response", "yes", "--depth", "2", "--hidden", "16", "--heads", "2", "--out", d});
    CHECK(r.code == 5);
  }

  TEST_CASE("localize writes all three reports") {
    const auto d = testing::scratch("cli-loc");
    REQUIRE(rot_small({"read", "--task", "coin-parity"}, d).code == 0);
    auto r = rot_small({"localize", "--readers", d + "/readers.rotv", "--prompt",
                        "A coin is heads up . Is the coin still heads up ?", "--max-new-tokens", "6"},
                       d);
    REQUIRE(r.code == 0);
    for (const char* ext : {"tsv", "txt", "html"}) CHECK(std::filesystem::exists(d + "/report." + ext));
    const auto first = bytes(d + "/report.html");
    REQUIRE(rot_small({"localize", "--readers", d + "/readers.rotv", "--prompt",
                       "A coin is heads up . Is the coin still heads up ?", "--max-new-tokens", "6",
                       "--format", "html", "--name", "again"},
                      d)
                .code == 0);
    CHECK(bytes(d + "/again.html") == first);
    CHECK(!std::filesystem::exists(d + "/again.tsv"));
  }

  TEST_CASE("steer with alpha zero matches generate") {
    const auto d = testing::scratch("cli-steer");
    REQUIRE(rot_small({"read", "--task", "coin-parity"}, d).code == 0);
    const auto s = rot_small({"steer", "--readers", d + "/readers.rotv", "--prompt", "A coin is heads up .",
                              "--max-new-tokens", "6", "--alpha", "0"},
                             d);
    const auto g = rot_small({"generate", "--prompt", "A coin is heads up .", "--max-new-tokens", "6"}, d);
    REQUIRE(s.code == 0);
    REQUIRE(g.code == 0);
    auto response = [](const std::string& text) { return text.substr(text.find("response:")); };
    CHECK(response(s.out) == response(g.out));
    CHECK(s.out.find("layer 2 alpha") != std::string::npos);
    CHECK(rot_small({"steer", "--readers", d + "/readers.rotv", "--prompt", "A coin", "--sign", "sideways"}, d).code ==
          2);
  }

  TEST_CASE("steer exports a policy that round trips") {
    const auto d = testing::scratch("cli-policy");
    REQUIRE(rot_small({"read", "--task", "coin-parity"}, d).code == 0);
    auto a = rot_small({"steer", "--readers", d + "/readers.rotv", "--prompt", "A coin is heads up .",
                        "--max-new-tokens", "4", "--alpha", "3", "--sign", "neg", "--export-policy", d + "/p.rots"},
                       d);
    REQUIRE(a.code == 0);
    auto b = rot_small({"steer", "--policy", d + "/p.rots", "--prompt", "A coin is heads up .", "--max-new-tokens", "4"},
                       d);
    REQUIRE(b.code == 0);
    CHECK(a.out.substr(a.out.find("response:")) == b.out.substr(b.out.find("response:")));
    const auto i = rot_cmd({"inspect", d + "/p.rots"});
    CHECK(i.out.find("alpha 3 sign neg layers 2 3") != std::string::npos);
  }

  TEST_CASE("robustness-table regenerates the robustness scores") {
    const auto r = rot_cmd({"robustness-table"});
    CHECK(r.out.find("5.46") != std::string::npos);
    CHECK(r.out.find("3.02") != std::string::npos);
  }

  TEST_CASE("dump header counts") {
    const auto d = testing::scratch("cli-dump");
    binio::write_text(d + "/p.jsonl",
                      "{\"id\":\"a\",\"polarity\":\"+\",\"text\":\"A coin is heads up .\"}\n"
                      "{\"id\":\"a\",\"polarity\":\"-\",\"text\":\"A coin .\"}\n");
    REQUIRE(rot_small({"dump", "--prompts", d + "/p.jsonl", "--layers", "1,2,3"}, d).code == 0);
    const auto i = rot_cmd({"inspect", d + "/activations.rotd"});
    CHECK(i.out.find("layers 1 2 3 records 2") != std::string::npos);
    auto raw = bytes(d + "/activations.rotd");
    raw[0] = 'Z';
    binio::write_file(d + "/bad.rotd", raw);
    CHECK(rot_cmd({"inspect", d + "/bad.rotd"}).code == 6);
    CHECK(rot_small({"read", "--task", "coin-parity", "--dump", d + "/bad.rotd"}, d).code == 6);
  }

  TEST_CASE("read from a dump equals the live read") {
    const auto d = testing::scratch("cli-dump-read");
    REQUIRE(rot_small({"prompts", "--task", "coin-parity"}, d).code == 0);
    REQUIRE(rot_small({"dump", "--prompts", d + "/prompts.jsonl"}, d).code == 0);
    REQUIRE(rot_small({"read", "--task", "coin-parity", "--output", d + "/live.rotv"}, d).code == 0);
    REQUIRE(rot_small({"read", "--task", "coin-parity", "--dump", d + "/activations.rotd", "--output",
                       d + "/dump.rotv"},
                      d)
                .code == 0);
    const auto a = reading::load_reading_vectors(d + "/live.rotv");
    const auto b = reading::load_reading_vectors(d + "/dump.rotv");
    for (int k : a.layers())
      for (std::size_t j = 0; j < a.at(k).size(); ++j) CHECK(std::abs(a.at(k)[j] - b.at(k)[j]) <= 1e-9);
  }

  TEST_CASE("eval replays identically across worker counts") {
    const auto a = testing::scratch("cli-eval-a"), b = testing::scratch("cli-eval-b");
    const std::vector<std::string> args = {"eval", "--task", "coin-parity", "--limit", "2", "--max-new-tokens", "4",
                                           "--conditions", "base,cot_z1,cot_z2,rot_z1,rot_z2"};
    auto r1 = rot_small(args, a, {"--workers", "1"});
    auto r2 = rot_small(args, b, {"--workers", "3"});
    REQUIRE(r1.code == 0);
    REQUIRE(r2.code == 0);
    CHECK(bytes(a + "/summary.jsonl") == bytes(b + "/summary.jsonl"));
    CHECK(bytes(a + "/records.jsonl") == bytes(b + "/records.jsonl"));
    CHECK(rot_small({"eval", "--task", "coin-parity", "--conditions", "base,sideways"}, a).code == 2);
  }

  TEST_CASE("configuration precedence") {
    const auto d = testing::scratch("cli-precedence");
    binio::write_text(d + "/big.conf", "# oversized N\nn-samples = 5000\n");
    binio::write_text(d + "/ok.conf", "n-samples = 8\n");
    // config file alone
    CHECK(rot_small({"read", "--task", "coin-parity", "--config", d + "/big.conf", "--n-samples", "8"}, d).code == 0);
    auto c = small(d);
    // drop --n-samples from the shared flags so the file value applies
    auto it = std::find(c.begin(), c.end(), "--n-samples");
    c.erase(it, it + 2);
    auto only_file = std::vector<std::string>{"read", "--task", "coin-parity", "--config", d + "/big.conf"};
    only_file.insert(only_file.end(), c.begin(), c.end());
    CHECK(rot_cmd(only_file).code == 3);
    // environment beats the file
    ::setenv("ROT_N_SAMPLES", "8", 1);
    CHECK(rot_cmd(only_file).code == 0);
    // flag beats the environment
    ::setenv("ROT_N_SAMPLES", "8", 1);
    auto with_flag = only_file;
    with_flag.insert(with_flag.end(), {"--n-samples", "5000"});
    CHECK(rot_cmd(with_flag).code == 3);
    ::setenv("ROT_N_SAMPLES", "5000", 1);
    auto ok_file = std::vector<std::string>{"read", "--task", "coin-parity", "--config", d + "/ok.conf"};
    ok_file.insert(ok_file.end(), c.begin(), c.end());
    CHECK(rot_cmd(ok_file).code == 3);
    ::unsetenv("ROT_N_SAMPLES");
    CHECK(rot_cmd(ok_file).code == 0);
    binio::write_text(d + "/bad.conf", "warp-factor = 9\n");
    CHECK(rot_small({"read", "--task", "coin-parity", "--config", d + "/bad.conf"}, d).code == 2);
  }

  TEST_CASE("settings parser") {
    cli::RunConfig c;
    CHECK(c.n_samples == 128);
    CHECK(c.layers == "last:5");
    CHECK(c.delta == 10.0);
    CHECK(c.m == 1);
    CHECK(c.max_new_tokens == 512);
    cli::apply_config_text(c, "# comment\n\ndelta = 2.5\nsign = neg\ncenter = false\n");
    CHECK(c.delta == 2.5);
    CHECK(c.sign == "neg");
    CHECK(!c.center);
    CHECK(c.is_explicit("delta"));
    CHECK(!c.is_explicit("alpha"));
    auto code = [&](const std::string& k, const std::string& v) {
      try {
        cli::apply_setting(c, k, v);
      } catch (const Error& e) {
        return static_cast<int>(e.code());
      }
      return -1;
    };
    CHECK(code("delta", "ten") == static_cast<int>(Errc::ConfigError));
    CHECK(code("bogus", "1") == static_cast<int>(Errc::ConfigError));
    CHECK(code("n-samples", "12") == -1);
    CHECK(c.n_samples == 12);
  }
}
