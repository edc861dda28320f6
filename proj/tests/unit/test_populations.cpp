#include <doctest.h>

#include "rot/error.hpp"
#include "rot/populations.hpp"
#include "support.hpp"

using namespace rot;
using namespace rot::populations;
using stimuli::Query;
using stimuli::StimulusSet;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::ConfigError;
}

StimulusSet small_set(std::size_t n) {
  std::vector<Query> qs;
  const char* text[] = {"A coin is heads up .", "Is the coin still heads up ?", "Ka flips the coin .",
                        "yes no yes", "Q: A: step"};
  for (std::size_t i = 0; i < n; ++i) qs.push_back({"q" + std::to_string(i), text[i % 5], "yes", {}});
  return stimuli::build_stimulus_set(qs, stimuli::bundled_zero_shot(), 1, "zero_shot",
                                     stimuli::TemplateRegistry::builtin());
}

}  // namespace

TEST_SUITE("populations") {
  TEST_CASE("layer resolution") {
    auto r = resolve_layers(LayerSpec::last_n(5), 32);
    CHECK(r.layers == std::vector<int>{28, 29, 30, 31, 32});
    CHECK(resolve_layers(LayerSpec::last_n(1), 6).layers == std::vector<int>{6});
    CHECK(code_of([] { resolve_layers(LayerSpec::of({2, 4, 9}), 8); }) == Errc::LayerOutOfRange);
    CHECK(code_of([] { resolve_layers(LayerSpec::last_n(7), 6); }) == Errc::LayerOutOfRange);
    CHECK(code_of([] { resolve_layers(LayerSpec::last_n(0), 6); }) == Errc::LayerOutOfRange);
    CHECK(resolve_layers(LayerSpec::of({4, 2, 4}), 8).layers == std::vector<int>{2, 4});
  }

  TEST_CASE("layer spec syntax") {
    CHECK(LayerSpec::parse("last:5").last == 5);
    CHECK(LayerSpec::parse("last(3)").last == 3);
    CHECK(LayerSpec::parse("1,3, 5").explicit_layers == std::vector<int>{1, 3, 5});
    CHECK(LayerSpec::parse("last:5").to_string() == "last:5");
    for (const char* bad : {"", "last:", "last:x", "1,,2", "a"})
      CHECK(code_of([&] { LayerSpec::parse(bad); }) == Errc::ConfigError);
  }

  TEST_CASE("shapes and degenerate pairs") {
    const auto tok = testing::tiny_tokenizer();
    const auto m = model::ToyTransformer::build(5, testing::small_config(static_cast<int>(tok.size())));
    ModelSource src(m, tok);
    const auto set = small_set(2);
    const auto pop = capture_population(src, set, resolve_layers(LayerSpec::of({3, 4}), 4));
    CHECK(pop.layers == std::vector<int>{3, 4});
    for (int k : {3, 4}) {
      CHECK(pop.layer(k).rows() == 2);
      CHECK(pop.layer(k).cols() == 16);
    }
    CHECK(pop.capture_position == "last_token");
    CHECK(pop.model_id == m.id());

    auto same = set;
    for (auto& p : same.pairs) p.positive = p.negative;
    const auto zero = capture_population(src, same, resolve_layers(LayerSpec::last_n(2), 4));
    for (int k : {3, 4})
      for (double x : zero.layer(k).data()) CHECK(x == 0.0);

    auto empty = set;
    empty.pairs[0].negative = "";
    CHECK(code_of([&] { capture_population(src, empty, resolve_layers(LayerSpec::last_n(1), 4)); }) ==
          Errc::EmptyPrompt);
  }

  TEST_CASE("antisymmetry and determinism") {
    const auto tok = testing::tiny_tokenizer();
    const auto m = model::ToyTransformer::build(6, testing::small_config(static_cast<int>(tok.size())));
    ModelSource src(m, tok);
    const auto set = small_set(4);
    auto swapped = set;
    for (auto& p : swapped.pairs) std::swap(p.positive, p.negative);
    const auto sel = resolve_layers(LayerSpec::last_n(2), 4);
    const auto a = capture_population(src, set, sel, 1);
    const auto b = capture_population(src, swapped, sel, 1);
    for (int k : sel.layers)
      for (std::size_t i = 0; i < a.layer(k).data().size(); ++i) CHECK(a.layer(k).data()[i] == -b.layer(k).data()[i]);
    const auto c = capture_population(src, set, sel, 4);
    CHECK(c.digest() == a.digest());
  }

  TEST_CASE("dump and live capture agree") {
    const auto tok = testing::tiny_tokenizer();
    const auto m = model::ToyTransformer::build(8, testing::small_config(static_cast<int>(tok.size())));
    const auto set = small_set(5);
    const auto sel = resolve_layers(LayerSpec::last_n(3), 4);
    const auto dump = dump_prompts(m, tok, prompts_of(set), sel.layers, DumpDtype::F64, 2);
    const auto dir = testing::scratch("pop-dump");
    dump.save(dir + "/a.rotd");
    const auto back = ActivationDump::load(dir + "/a.rotd");
    CHECK(back.serialize() == dump.serialize());
    const auto live = capture_population(ModelSource(m, tok), set, sel);
    const auto fromdump = capture_population(DumpSource(back), set, sel);
    for (int k : sel.layers) {
      const auto& x = live.layer(k).data();
      const auto& y = fromdump.layer(k).data();
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - y[i]) <= 1e-9);
    }
    // f32 dumps lose precision but stay close
    const auto d32 = ActivationDump::deserialize(
        dump_prompts(m, tok, prompts_of(set), sel.layers, DumpDtype::F32).serialize());
    CHECK(d32.dtype == DumpDtype::F32);
    const auto p32 = capture_population(DumpSource(d32), set, sel);
    for (std::size_t i = 0; i < live.layer(4).data().size(); ++i)
      CHECK(std::abs(p32.layer(4).data()[i] - live.layer(4).data()[i]) < 1e-4);
  }

  TEST_CASE("planted dump rows equal the planted direction") {
    Rng rng(77);
    const auto set = small_set(6);
    const auto u = testing::random_vector(rng, 8);
    ActivationDump dump;
    dump.model_id = "external";
    dump.hidden = 8;
    dump.layers = {2, 5};
    for (const auto& p : set.pairs) {
      const auto neg2 = testing::random_vector(rng, 8), neg5 = testing::random_vector(rng, 8);
      auto pos5 = neg5;
      for (std::size_t j = 0; j < 8; ++j) pos5[j] += u[j];
      dump.add({p.pair_id(), Polarity::Negative, {neg2, neg5}});
      dump.add({p.pair_id(), Polarity::Positive, {testing::random_vector(rng, 8), pos5}});
    }
    const auto back = ActivationDump::deserialize(dump.serialize());
    DumpSource src(back);
    const auto pop = capture_population(src, set, resolve_layers(LayerSpec::of({5}), src.depth()));
    for (std::size_t i = 0; i < pop.layer(5).rows(); ++i)
      for (std::size_t j = 0; j < 8; ++j) CHECK(pop.layer(5).row(i)[j] == doctest::Approx(u[j]).epsilon(1e-15));

    CHECK(code_of([&] { capture_population(src, set, resolve_layers(LayerSpec::of({3}), 5)); }) ==
          Errc::DumpMissingLayer);
    auto bigger = small_set(7);
    CHECK(code_of([&] { capture_population(src, bigger, resolve_layers(LayerSpec::of({5}), 5)); }) ==
          Errc::DumpMissingPrompt);
  }

  TEST_CASE("dump file validation") {
    ActivationDump d;
    d.model_id = "m";
    d.hidden = 2;
    d.layers = {1};
    d.add({"p", Polarity::Positive, {{1.0, 2.0}}});
    CHECK(code_of([&] { d.add({"q", Polarity::Positive, {{1.0}}}); }) == Errc::DimensionMismatch);
    auto bytes = d.serialize();
    bytes.push_back(0);
    CHECK(code_of([&] { ActivationDump::deserialize(bytes); }) == Errc::CorruptFile);
    bytes = d.serialize();
    bytes.resize(bytes.size() - 3);
    CHECK(code_of([&] { ActivationDump::deserialize(bytes); }) == Errc::CorruptFile);
    bytes = d.serialize();
    bytes[1] = 'X';
    CHECK(code_of([&] { ActivationDump::deserialize(bytes); }) == Errc::CorruptFile);
    CHECK(code_of([&] { ActivationDump::load("/nonexistent/x.rotd"); }) == Errc::IoFailure);
  }

  TEST_CASE("prompts file round trip") {
    const auto set = small_set(3);
    const auto ps = prompts_of(set);
    CHECK(ps.size() == 6);
    const auto back = parse_prompts_jsonl(prompts_to_jsonl(ps));
    REQUIRE(back.size() == ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      CHECK(back[i].id == ps[i].id);
      CHECK(back[i].polarity == ps[i].polarity);
      CHECK(back[i].text == ps[i].text);
    }
  }
}
