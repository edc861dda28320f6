#include <doctest.h>

#include <cmath>

#include "rot/binio.hpp"
#include "rot/error.hpp"
#include "rot/model.hpp"
#include "support.hpp"

using namespace rot;
using namespace rot::model;

namespace {

ModelConfig spec_config() {
  ModelConfig c;
  c.layers = 4;
  c.hidden = 32;
  c.heads = 4;
  c.vocab = 64;
  c.context = 64;
  return c;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::ConfigError;
}

ToyTransformer planted_model(std::uint64_t seed, TokenId target, Vector* dir_out = nullptr) {
  auto c = testing::small_config();
  c.final_norm = FinalNorm::Identity;
  Rng rng(seed + 100);
  PlantSpec p;
  p.layer = c.layers;
  p.direction = testing::random_unit(rng, static_cast<std::size_t>(c.hidden));
  p.target = target;
  if (dir_out) *dir_out = p.direction;
  return ToyTransformer::build_planted(seed, c, p);
}

InjectionHook fixed_hook(int layer, const Vector& dir, double alpha) {
  InjectionHook h;
  h.directions[layer] = dir;
  h.scale = alpha;
  h.sign_mode = SignMode::Fixed;
  return h;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("build is deterministic and seed sensitive") {
    const auto a = ToyTransformer::build(7, spec_config());
    const auto b = ToyTransformer::build(7, spec_config());
    const auto c = ToyTransformer::build(8, spec_config());
    const std::vector<TokenId> bos = {0};
    const auto la = forward_with_taps(a, bos).logits[0];
    CHECK(la == forward_with_taps(b, bos).logits[0]);
    CHECK(la != forward_with_taps(c, bos).logits[0]);
    CHECK(a.serialize() == b.serialize());
  }

  TEST_CASE("config validation") {
    auto c = spec_config();
    c.hidden = 33;
    CHECK(code_of([&] { ToyTransformer::build(7, c); }) == Errc::InvalidConfig);
    c = spec_config();
    c.layers = 0;
    CHECK(code_of([&] { ToyTransformer::build(7, c); }) == Errc::InvalidConfig);
    c = spec_config();
    c.vocab = 3;
    CHECK(code_of([&] { ToyTransformer::build(7, c); }) == Errc::InvalidConfig);
    c = spec_config();
    c.hidden = 1;
    c.heads = 1;
    CHECK(code_of([&] { ToyTransformer::build(7, c); }) == Errc::InvalidConfig);
  }

  TEST_CASE("trace shape on a single token") {
    const auto m = ToyTransformer::build(7, spec_config());
    const std::vector<TokenId> bos = {0};
    const auto r = forward_with_taps(m, bos);
    CHECK(r.trace.layers() == 4);
    CHECK(r.trace.positions() == 1);
    for (int k = 1; k <= 4; ++k) {
      const auto h = r.trace.at(k, 0);
      CHECK(h.size() == 32);
      for (double x : h) CHECK(std::isfinite(x));
    }
    CHECK(code_of([&] { (void)r.trace.at(5, 0); }) == Errc::LayerMismatch);
    CHECK(code_of([&] { (void)r.trace.at(0, 0); }) == Errc::LayerMismatch);
  }

  TEST_CASE("token out of range") {
    const auto m = ToyTransformer::build(7, spec_config());
    const std::vector<TokenId> bad = {0, 64};
    CHECK(code_of([&] { forward_with_taps(m, bad); }) == Errc::TokenOutOfRange);
    CHECK(code_of([&] { generate(m, bad, 1, 1); }) == Errc::TokenOutOfRange);
  }

  TEST_CASE("empty hook is a no-op") {
    const auto m = ToyTransformer::build(3, testing::small_config());
    Rng rng(1);
    const auto toks = testing::random_tokens(rng, 10, 64);
    InjectionHook h;
    h.scale = 5.0;
    CHECK(forward_with_taps(m, toks, &h).logits == forward_with_taps(m, toks).logits);
  }

  TEST_CASE("causality") {
    const auto m = ToyTransformer::build(11, testing::small_config());
    Rng rng(2);
    auto toks = testing::random_tokens(rng, 12, 64);
    const auto base = forward_with_taps(m, toks).logits;
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
      auto other = toks;
      for (std::size_t j = i + 1; j < other.size(); ++j) other[j] = (other[j] + 17) % 64;
      const auto alt = forward_with_taps(m, other).logits;
      for (std::size_t p = 0; p <= i; ++p) CHECK(alt[p] == base[p]);
    }
  }

  TEST_CASE("prefix trace equivalence") {
    const auto m = ToyTransformer::build(5, testing::small_config());
    Rng rng(4);
    const auto toks = testing::random_tokens(rng, 15, 64);
    const auto full = forward_with_taps(m, toks, nullptr, false).trace;
    for (std::size_t i = 1; i <= toks.size(); ++i) {
      const auto pre = forward_with_taps(m, std::span(toks).first(i), nullptr, false).trace;
      for (int k = 1; k <= 4; ++k) {
        const auto a = full.at(k, i - 1), b = pre.at(k, i - 1);
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::abs(a[j] - b[j]) <= 1e-9);
      }
    }
  }

  TEST_CASE("injection exactness") {
    const auto m = ToyTransformer::build(9, testing::small_config());
    Rng rng(6);
    const auto toks = testing::random_tokens(rng, 8, 64);
    const auto r2 = testing::random_unit(rng, 16), r3 = testing::random_unit(rng, 16);
    InjectionHook h;
    h.directions[2] = r2;
    h.directions[3] = r3;
    h.scale = 1.5;
    h.sign_mode = SignMode::Fixed;
    h.start_position = 5;
    const auto plain = forward_with_taps(m, toks).trace;
    const auto steered = forward_with_taps(m, toks, &h).trace;
    for (std::size_t p = 0; p < toks.size(); ++p) {
      // below the lowest steered layer nothing moves
      const auto a = plain.at(1, p), b = steered.at(1, p);
      for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
      if (p < 5) {
        for (int k = 2; k <= 4; ++k) {
          const auto x = plain.at(k, p), y = steered.at(k, p);
          for (std::size_t j = 0; j < x.size(); ++j) CHECK(x[j] == y[j]);
        }
      }
    }
    // at the application point the offset is exactly alpha * R
    const auto pre = steered.pre_injection(2, 5), post = steered.at(2, 5), clean = plain.at(2, 5);
    for (std::size_t j = 0; j < 16; ++j) {
      CHECK(std::abs(post[j] - pre[j] - 1.5 * r2[j]) <= 1e-12);
      CHECK(pre[j] == clean[j]);
    }
    const auto pre3 = steered.pre_injection(3, 7), post3 = steered.at(3, 7);
    for (std::size_t j = 0; j < 16; ++j) CHECK(std::abs(post3[j] - pre3[j] - 1.5 * r3[j]) <= 1e-12);
  }

  TEST_CASE("follow-projection sign is frozen per layer") {
    const auto m = ToyTransformer::build(9, testing::small_config());
    Rng rng(12);
    const auto toks = testing::random_tokens(rng, 6, 64);
    const auto plain = forward_with_taps(m, toks).trace;
    InjectionHook h;
    for (int k : {2, 4}) h.directions[k] = testing::random_unit(rng, 16);
    h.scale = -2.0;
    h.sign_mode = SignMode::FollowProjection;
    const auto inj = resolve_injection(m, toks, h);
    for (int k : {2, 4}) {
      const double proj = linalg::dot(plain.at(k, 5), h.directions[k]);
      CHECK(inj.alphas.at(k) == (proj >= 0 ? 2.0 : -2.0));
    }
  }

  TEST_CASE("hook validation") {
    const auto m = ToyTransformer::build(9, testing::small_config());
    const std::vector<TokenId> toks = {0, 5, 6};
    Vector u(16, 0.0);
    u[0] = 1.0;
    auto h = fixed_hook(5, u, 1.0);
    CHECK(code_of([&] { resolve_injection(m, toks, h); }) == Errc::LayerMismatch);
    h = fixed_hook(2, Vector(8, 0.25), 1.0);
    CHECK(code_of([&] { resolve_injection(m, toks, h); }) == Errc::DimensionMismatch);
    Vector v(16, 0.0);
    v[0] = 2.0;
    h = fixed_hook(2, v, 1.0);
    CHECK(code_of([&] { resolve_injection(m, toks, h); }) == Errc::NormViolation);
  }

  TEST_CASE("planted model: zero, linearity and slope") {
    Vector u;
    const auto m = planted_model(21, 9, &u);
    REQUIRE(m.planted().has_value());
    const double s = m.planted()->slope;
    // slope recomputed from the unembedding column
    double want = 0.0;
    const auto& w = m.weights().unembedding;
    for (std::size_t i = 0; i < 16; ++i) want += w[i * 64 + 9] * u[i];
    CHECK(std::abs(s - want) <= 1e-12);

    Rng rng(22);
    const auto toks = testing::random_tokens(rng, 7, 64);
    const double base = forward_with_taps(m, toks).logits.back()[9];
    auto delta = [&](double a) {
      auto h = fixed_hook(4, u, a);
      return forward_with_taps(m, toks, &h).logits.back()[9] - base;
    };
    CHECK(delta(0.0) == 0.0);
    auto h0 = fixed_hook(4, u, 0.0);
    CHECK(forward_with_taps(m, toks, &h0).logits == forward_with_taps(m, toks).logits);
    const double d1 = delta(0.7), d2 = delta(1.4);
    CHECK(std::abs(d2 - 2.0 * d1) < 1e-9);
    CHECK(std::abs(delta(1.0) - s) < 1e-9);
  }

  TEST_CASE("planted model preconditions") {
    auto c = testing::small_config();
    PlantSpec p;
    p.layer = c.layers;
    p.direction = Vector(16, 0.25);
    p.target = 3;
    CHECK(code_of([&] { ToyTransformer::build_planted(1, c, p); }) == Errc::InvalidConfig);
    c.final_norm = FinalNorm::Identity;
    p.layer = 2;
    CHECK(code_of([&] { ToyTransformer::build_planted(1, c, p); }) == Errc::InvalidConfig);
  }

  TEST_CASE("generate") {
    const auto m = ToyTransformer::build(7, spec_config());
    const std::vector<TokenId> prompt = {0, 10, 11, 12};
    const auto one = generate(m, prompt, 1, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == argmax_token(forward_with_taps(m, prompt).logits.back()));
    const auto a = generate(m, prompt, 20, 1), b = generate(m, prompt, 20, 1);
    CHECK(a == b);
    CHECK(a.size() <= 20);
    // stops at eos: use the first generated token as the stop symbol
    const auto stop = generate(m, prompt, 20, one[0]);
    CHECK(stop.size() == 1);
  }

  TEST_CASE("greedy ties go to the lowest id") {
    const std::vector<double> l = {1.0, 3.0, 3.0, 2.0};
    CHECK(argmax_token(l) == 1);
    CHECK(token_rank(l, 1) == 0);
    CHECK(token_rank(l, 2) == 0);
    CHECK(token_rank(l, 3) == 2);
    CHECK(token_rank(l, 0) == 3);
  }

  TEST_CASE("steering toward the planted target improves its rank") {
    Vector u;
    const auto m = planted_model(31, 13, &u);
    Rng rng(32);
    int improved = 0;
    for (int trial = 0; trial < 10; ++trial) {
      const auto prompt = testing::random_tokens(rng, 6, 64);
      Vector plain, steered;
      generate_resolved(m, prompt, 1, 1, std::nullopt, &plain);
      const auto h = fixed_hook(4, u, 50.0);
      generate_resolved(m, prompt, 1, 1, resolve_injection(m, prompt, h), &steered);
      const auto r0 = token_rank(plain, 13), r1 = token_rank(steered, 13);
      CHECK(r1 <= r0);
      if (r0 > 0) {
        CHECK(r1 < r0);
        ++improved;
      }
    }
    CHECK(improved > 0);
  }

  TEST_CASE("perplexity: uniform logits give V") {
    auto m = ToyTransformer::build(3, testing::small_config());
    auto w = m.weights();
    std::fill(w.unembedding.begin(), w.unembedding.end(), 0.0);
    const auto u = ToyTransformer::from_weights(m.config(), 3, w);
    Rng rng(1);
    const auto toks = testing::random_tokens(rng, 9, 64);
    CHECK(std::abs(perplexity(u, toks) - 64.0) < 1e-6);
  }

  TEST_CASE("perplexity: certain predictions give 1") {
    auto m = ToyTransformer::build(3, testing::small_config());
    auto w = m.weights();
    // constant final hidden state b; only token 5 lines up with it
    std::fill(w.final_gain.begin(), w.final_gain.end(), 0.0);
    std::fill(w.final_bias.begin(), w.final_bias.end(), 1.0);
    std::fill(w.unembedding.begin(), w.unembedding.end(), 0.0);
    for (std::size_t i = 0; i < 16; ++i) w.unembedding[i * 64 + 5] = 100.0;
    const auto u = ToyTransformer::from_weights(m.config(), 3, w);
    const std::vector<TokenId> toks = {0, 5, 5, 5, 5};
    CHECK(perplexity(u, toks) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(perplexity(u, toks) >= 1.0);
  }

  TEST_CASE("perplexity matches a per-step softmax oracle") {
    const auto m = ToyTransformer::build(17, testing::small_config());
    Rng rng(18);
    const auto toks = testing::random_tokens(rng, 20, 64);
    const auto logits = forward_with_taps(m, toks).logits;
    long double nll = 0;
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
      long double mx = -1e300L;
      for (double x : logits[i]) mx = std::max(mx, static_cast<long double>(x));
      long double z = 0;
      for (double x : logits[i]) z += std::exp(static_cast<long double>(x) - mx);
      nll -= static_cast<long double>(logits[i][toks[i + 1]]) - mx - std::log(z);
    }
    const double want = static_cast<double>(std::exp(nll / (toks.size() - 1)));
    CHECK(std::abs(perplexity(m, toks) - want) <= 1e-9 * want);
    const std::vector<TokenId> one = {3};
    CHECK(code_of([&] { perplexity(m, one); }) == Errc::SequenceTooShort);
  }

  TEST_CASE("checkpoint round trip") {
    Vector u;
    const auto m = planted_model(41, 2, &u);
    const auto dir = testing::scratch("model-ckpt");
    m.save(dir + "/m.rotm");
    const auto back = ToyTransformer::load(dir + "/m.rotm");
    CHECK(back.serialize() == m.serialize());
    CHECK(back.id() == m.id());
    CHECK(back.planted()->slope == m.planted()->slope);
    auto bytes = m.serialize();
    bytes[0] = 'X';
    CHECK(code_of([&] { ToyTransformer::deserialize(bytes); }) == Errc::CorruptFile);
    bytes = m.serialize();
    bytes.resize(bytes.size() / 2);
    CHECK(code_of([&] { ToyTransformer::deserialize(bytes); }) == Errc::CorruptFile);
    CHECK(code_of([&] { ToyTransformer::load(dir + "/absent.rotm"); }) == Errc::IoFailure);
  }

  TEST_CASE("incremental decoding equals the full pass") {
    const auto m = ToyTransformer::build(19, testing::small_config());
    Rng rng(20);
    const auto toks = testing::random_tokens(rng, 10, 64);
    const auto full = forward_with_taps(m, toks).logits;
    DecodeSession s(m);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const auto lg = s.append(toks[i]);
      CHECK(Vector(lg.begin(), lg.end()) == full[i]);
    }
  }
}

TEST_SUITE("tokenizer") {
  TEST_CASE("specials, ids and round trip") {
    const auto t = testing::tiny_tokenizer();
    CHECK(t.token(t.bos()) == "<bos>");
    CHECK(t.token(t.eos()) == "<eos>");
    CHECK(t.token(t.unk()) == "<unk>");
    for (TokenId i = 0; i < t.size(); ++i) CHECK(t.find(t.token(i)) == i);
    const std::string s = "A coin is heads up .";
    CHECK(t.decode(t.encode(s)) == s);
    CHECK(t.encode("zebra") == std::vector<TokenId>{t.unk()});
    CHECK(t.find("417").has_value());
  }

  TEST_CASE("punctuation splits off") {
    const auto p = Tokenizer::pretokenize("step by step. Yes, no?");
    CHECK(p == std::vector<std::string>{"step", "by", "step", ".", "Yes", ",", "no", "?"});
  }

  TEST_CASE("lexicon text round trip and validation") {
    const auto t = testing::tiny_tokenizer();
    const auto back = Tokenizer::from_lexicon_text(t.to_lexicon_text());
    CHECK(back.size() == t.size());
    CHECK(back.to_lexicon_text() == t.to_lexicon_text());
    CHECK(code_of([] { Tokenizer(std::vector<std::string>{"a", "b"}); }) == Errc::InvalidConfig);
    CHECK(code_of([] { Tokenizer(std::vector<std::string>{"<bos>", "<eos>", "<unk>", "a", "a"}); }) ==
          Errc::InvalidConfig);
  }

  TEST_CASE("bundled lexicon loads") {
    const auto t = Tokenizer::from_lexicon_file(std::string(ROT_DATA_DIR) + "/lexicon.txt");
    CHECK(t.size() > 1000);
  }
}

TEST_SUITE("rng") {
  TEST_CASE("streams are reproducible") {
    Rng a(5), b(5), c(6);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(Rng(5).next_u64() != c.next_u64());
    CHECK(derive_seed(1, "x") == derive_seed(1, "x"));
    CHECK(derive_seed(1, "x") != derive_seed(1, "y"));
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  }

  TEST_CASE("draw ranges") {
    Rng r(9);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double u = r.uniform();
      CHECK((u >= 0.0 && u < 1.0));
      CHECK(r.below(7) < 7);
      const double z = r.normal();
      sum += z;
      sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
  }

  TEST_CASE("binary reader bounds") {
    binio::Writer w;
    w.magic("ABCD");
    w.u32(7);
    w.str("hi");
    w.f64(2.5);
    binio::Reader r(w.buffer());
    r.expect_magic("ABCD");
    CHECK(r.u32() == 7);
    CHECK(r.str() == "hi");
    CHECK(r.f64() == 2.5);
    CHECK(r.at_end());
    CHECK(code_of([&] { r.u8(); }) == Errc::CorruptFile);
    binio::Reader bad(w.buffer());
    CHECK(code_of([&] { bad.expect_magic("ABCE"); }) == Errc::CorruptFile);
  }
}
