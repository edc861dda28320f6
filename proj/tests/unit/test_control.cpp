#include <doctest.h>

#include "rot/error.hpp"
#include "rot/control.hpp"
#include "support.hpp"

using namespace rot;
using namespace rot::control;

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

}  // namespace

TEST_SUITE("control") {
  TEST_CASE("sign rule examples") {
    model::ActivationTrace tr(4, 2);
    for (int k = 1; k <= 4; ++k) tr.push(k, std::vector<double>{-1.0, -2.0});
    tr.finish_position();
    SteeringPolicy p;
    for (int k : {2, 3, 4}) p.readers.vectors[k] = {1.0, 0.0};
    p.alpha = 1.8;
    for (const auto& [k, a] : effective_alphas(p, tr, 0)) CHECK(a == -1.8);
    p.alpha = -1.8;
    for (const auto& [k, a] : effective_alphas(p, tr, 0)) CHECK(a == -1.8);

    p.sign = SignPolicy::FixedPositive;
    p.alpha = 0.0;
    for (const auto& [k, a] : effective_alphas(p, tr, 0)) CHECK(a == 0.0);
    p.alpha = -3.0;
    for (const auto& [k, a] : effective_alphas(p, tr, 0)) CHECK(a == 3.0);
    p.sign = SignPolicy::FixedNegative;
    for (const auto& [k, a] : effective_alphas(p, tr, 0)) CHECK(a == -3.0);

    // sign(0) = +1
    p.sign = SignPolicy::FollowProjection;
    p.readers.vectors.clear();
    p.readers.vectors[1] = {0.0, 0.0};
    p.readers.vectors[1] = {std::sqrt(0.8), -std::sqrt(0.2)};  // -0.894 + 0.894
    model::ActivationTrace z(4, 2);
    for (int k = 1; k <= 4; ++k) z.push(k, std::vector<double>{0.0, 0.0});
    z.finish_position();
    CHECK(effective_alphas(p, z, 0).at(1) == 3.0);

    p.readers.vectors[6] = {1.0, 0.0};
    CHECK(code_of([&] { effective_alphas(p, tr, 0); }) == Errc::LayerMismatch);
  }

  TEST_CASE("mixed signs follow an independent projection") {
    const auto m = model::ToyTransformer::build(4, testing::small_config());
    Rng rng(44);
    const auto prompt = testing::random_tokens(rng, 9, 64);
    const auto tr = model::forward_with_taps(m, prompt, nullptr, false).trace;
    SteeringPolicy p;
    for (int k = 1; k <= 4; ++k) p.readers.vectors[k] = testing::random_unit(rng, 16);
    p.alpha = 0.7;
    const auto alphas = effective_alphas(p, tr, 8);
    int pos = 0, neg = 0;
    for (int k = 1; k <= 4; ++k) {
      double dot = 0;
      for (std::size_t j = 0; j < 16; ++j) dot += tr.at(k, 8)[j] * p.readers.at(k)[j];
      CHECK(alphas.at(k) == (dot >= 0 ? 0.7 : -0.7));
      (dot >= 0 ? pos : neg)++;
    }
    const auto r = steered_generate(m, prompt, p, 4, 1);
    CHECK(r.diagnostics.alphas == alphas);
    for (int k = 1; k <= 4; ++k)
      CHECK(r.diagnostics.projections.at(k) == doctest::Approx(linalg::dot(tr.at(k, 8), p.readers.at(k))));
    CHECK(steered_generate(m, prompt, p, 4, 1).tokens == r.tokens);
  }

  TEST_CASE("alpha zero matches plain generation") {
    const auto m = model::ToyTransformer::build(4, testing::small_config());
    Rng rng(45);
    const auto prompt = testing::random_tokens(rng, 5, 64);
    SteeringPolicy p;
    for (int k : {3, 4}) p.readers.vectors[k] = testing::random_unit(rng, 16);
    p.alpha = 0.0;
    CHECK(steered_generate(m, prompt, p, 12, 1).tokens == model::generate(m, prompt, 12, 1));
  }

  TEST_CASE("layers outside the model") {
    const auto m = model::ToyTransformer::build(4, testing::small_config());
    SteeringPolicy p;
    Vector u(16, 0.0);
    u[0] = 1;
    p.readers.vectors[7] = u;
    p.alpha = 1;
    const std::vector<model::TokenId> prompt = {0, 3};
    CHECK(code_of([&] { steered_generate(m, prompt, p, 2, 1); }) == Errc::LayerMismatch);
    SteeringPolicy empty;
    CHECK(code_of([&] { empty.validate(); }) == Errc::InvalidConfig);
    p.alpha = std::nan("");
    CHECK(code_of([&] { p.validate(); }) == Errc::InvalidConfig);
  }

  TEST_CASE("planted model: target logit rises with alpha at the recorded slope") {
    auto c = testing::small_config();
    c.final_norm = model::FinalNorm::Identity;
    Rng rng(50);
    model::PlantSpec spec;
    spec.layer = 4;
    spec.direction = testing::random_unit(rng, 16);
    spec.target = 11;
    const auto m = model::ToyTransformer::build_planted(50, c, spec);
    const double slope = m.planted()->slope;
    REQUIRE(slope > 0);
    const auto prompt = testing::random_tokens(rng, 6, 64);
    SteeringPolicy p;
    p.readers.vectors[4] = spec.direction;
    p.sign = SignPolicy::FixedPositive;
    std::vector<double> logit;
    for (double a : {0.0, 0.5, 1.0, 2.0}) {
      p.alpha = a;
      logit.push_back(steered_generate(m, prompt, p, 1, 1).diagnostics.first_logits[11]);
    }
    for (std::size_t i = 1; i < logit.size(); ++i) CHECK(logit[i] > logit[i - 1]);
    const double as[] = {0.0, 0.5, 1.0, 2.0};
    for (std::size_t i = 1; i < 4; ++i) CHECK(std::abs((logit[i] - logit[0]) - as[i] * slope) <= 1e-9);
  }

  TEST_CASE("layers below the lowest steered layer are untouched") {
    const auto m = model::ToyTransformer::build(4, testing::small_config());
    Rng rng(46);
    const auto prompt = testing::random_tokens(rng, 5, 64);
    SteeringPolicy p;
    p.readers.vectors[3] = testing::random_unit(rng, 16);
    p.alpha = 2.0;
    const auto h = p.hook();
    const auto a = model::forward_with_taps(m, prompt, &h).trace;
    const auto b = model::forward_with_taps(m, prompt).trace;
    for (int k : {1, 2})
      for (std::size_t pos = 0; pos < 5; ++pos) {
        const auto x = a.at(k, pos), y = b.at(k, pos);
        CHECK(std::equal(x.begin(), x.end(), y.begin()));
      }
  }

  TEST_CASE("policy file round trip") {
    Rng rng(47);
    SteeringPolicy p;
    p.readers.vectors[5] = testing::random_unit(rng, 8);
    p.readers.vectors[6] = testing::random_unit(rng, 8);
    p.readers.explained = {{5, 0.5}, {6, 0.25}};
    p.alpha = 4.5;
    p.sign = SignPolicy::FixedNegative;
    const auto dir = testing::scratch("policy");
    save_policy(p, dir + "/p.rots");
    const auto q = load_policy(dir + "/p.rots");
    CHECK(q.readers == p.readers);
    CHECK(q.alpha == 4.5);
    CHECK(q.sign == SignPolicy::FixedNegative);
    auto bytes = serialize(p);
    bytes.pop_back();
    CHECK(code_of([&] { deserialize_policy(bytes); }) == Errc::CorruptFile);
    CHECK(parse_sign("proj") == SignPolicy::FollowProjection);
    CHECK(std::string(sign_name(SignPolicy::FixedPositive)) == "pos");
    CHECK(code_of([] { parse_sign("up"); }) == Errc::ConfigError);
  }
}
