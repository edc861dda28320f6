#include "rot/toytasks.hpp"

#include <cstdio>

#include <json.hpp>

#include "rot/error.hpp"
#include "rot/rng.hpp"

namespace rot::toytasks {

namespace {

const std::vector<std::string> kPeople = {
    "Ka",     "Sherrie", "Jamey",  "Teressa", "Maybelle", "Conception", "Sal",    "Ryan",
    "Shaunda", "James",  "Carl",   "Randy",   "Tanner",   "Kenny",      "Kim",    "Leah",
    "Jason",  "Denny",   "Shawn",  "Michael", "Olivia",   "Brooke",     "Maria",  "Tom",
    "Anna",   "Peter",   "Lucia",  "Omar",    "Grace",    "Victor",     "Nina",   "Paul",
    "Rosa",   "Felix",   "Hana",   "Ivan",    "Clara",    "Mateo",      "Sofia",  "Bruno"};

const std::vector<std::string> kItems = {"apples", "books", "pencils", "marbles", "stamps",
                                         "cards",  "shells", "coins",  "stickers", "cookies"};

const char* kOrdinals[] = {"first", "second", "third"};

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
  return pool[rng.below(pool.size())];
}

std::string make_id(std::string_view task, std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return std::string(task) + "-" + buf;
}

struct Item {
  std::string question, answer, rationale;
};

Item coin_parity(Rng& rng) {
  const std::size_t people = 2 + rng.below(3);
  std::string q = "A coin is heads up.";
  std::vector<std::string> flippers;
  for (std::size_t i = 0; i < people; ++i) {
    const std::string& who = pick(kPeople, rng);
    if (rng.below(2) == 1) {
      q += " " + who + " flips the coin.";
      flippers.push_back(who);
    } else {
      q += " " + who + " does not flip the coin.";
    }
  }
  q += " Is the coin still heads up?";
  const std::size_t n = flippers.size();
  const bool even = n % 2 == 0;
  std::string r;
  if (n == 0) {
    r = "The coin was flipped by no one. So the coin was flipped 0 times. The coin started heads up, "
        "and it was not flipped, so it is still heads up.";
  } else {
    std::string by;
    for (std::size_t i = 0; i < n; ++i) {
      by += (i == 0 ? "" : (i + 1 == n ? " and " : ", ")) + flippers[i];
    }
    r = "The coin was flipped by " + by + ". So the coin was flipped " + std::to_string(n) +
        (n == 1 ? " time" : " times") + ", which is an " + (even ? "even" : "odd") +
        " number. The coin started heads up, so after an " + (even ? "even" : "odd") +
        " number of flips, it will " + (even ? "still be heads up." : "be tails up.");
  }
  const std::string a = even ? "yes" : "no";
  return {q, a, r + " So the answer is " + a + "."};
}

Item letter_pick(Rng& rng) {
  const std::size_t words = 2 + rng.below(3);
  const std::size_t pos = rng.below(3);
  std::vector<std::string> picked;
  for (std::size_t i = 0; i < words; ++i) picked.push_back(pick(kPeople, rng));
  for (auto& w : picked) {
    while (w.size() <= pos) w = pick(kPeople, rng);
  }
  std::string list, answer, r;
  for (const auto& w : picked) {
    list += (list.empty() ? "" : " ") + w;
    answer += w[pos];
    r += std::string("The ") + kOrdinals[pos] + " letter of \"" + w + "\" is \"" + w[pos] + "\". ";
  }
  const std::string q = std::string("Take the ") + kOrdinals[pos] + " letters of the words in \"" + list +
                        "\" and concatenate them.";
  r += "Concatenating them is \"" + answer + "\". The answer is " + answer + ".";
  return {q, answer, r};
}

Item add_small(Rng& rng) {
  const std::string& who = pick(kPeople, rng);
  const std::string& what = pick(kItems, rng);
  const int a = 1 + static_cast<int>(rng.below(50));
  const int b = 1 + static_cast<int>(rng.below(50));
  const std::string q = who + " has " + std::to_string(a) + " " + what + ". " + who + " gets " +
                        std::to_string(b) + " more " + what + ". How many " + what + " does " + who +
                        " have now?";
  const std::string s = std::to_string(a + b);
  const std::string r = who + " started with " + std::to_string(a) + " " + what + ". Then " + who +
                        " got " + std::to_string(b) + " more. " + std::to_string(a) + " + " +
                        std::to_string(b) + " = " + s + ". The answer is " + s + ".";
  return {q, s, r};
}

Item make_item(std::string_view task, Rng& rng) {
  if (task == "coin-parity") return coin_parity(rng);
  if (task == "letter-pick") return letter_pick(rng);
  if (task == "add-small") return add_small(rng);
  throw Error(Errc::ConfigError, "unknown toy task '" + std::string(task) + "'");
}

}  // namespace

const std::vector<std::string>& names() {
  static const std::vector<std::string> n = {"coin-parity", "letter-pick", "add-small"};
  return n;
}

eval::TaskKind kind_of(std::string_view task) {
  if (task == "coin-parity") return eval::TaskKind::YesNo;
  if (task == "letter-pick") return eval::TaskKind::Letters;
  if (task == "add-small") return eval::TaskKind::Number;
  throw Error(Errc::ConfigError, "unknown toy task '" + std::string(task) + "'");
}

std::vector<stimuli::Query> generate(std::string_view task, std::size_t count, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "toytasks." + std::string(task) + ".queries"));
  std::vector<stimuli::Query> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto it = make_item(task, rng);
    out.push_back({make_id(task, i), it.question, it.answer, {}});
  }
  return out;
}

std::vector<stimuli::Demonstration> demonstrations(std::string_view task, std::size_t count,
                                                   std::uint64_t seed) {
  Rng rng(derive_seed(seed, "toytasks." + std::string(task) + ".demos"));
  std::vector<stimuli::Demonstration> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto it = make_item(task, rng);
    out.push_back({it.question, it.rationale});
  }
  return out;
}

std::string queries_to_jsonl(const std::vector<stimuli::Query>& queries) {
  std::string out;
  for (const auto& q : queries) {
    nlohmann::ordered_json j;
    j["id"] = q.id;
    j["question"] = q.question;
    j["answer"] = q.answer;
    if (!q.demonstrations.empty()) {
      j["demonstrations"] = nlohmann::ordered_json::array();
      for (const auto& d : q.demonstrations) j["demonstrations"].push_back({{"q", d.question}, {"a", d.answer}});
    }
    out += j.dump() + "\n";
  }
  return out;
}

std::string demos_to_jsonl(const std::vector<stimuli::Demonstration>& demos) {
  std::string out;
  for (const auto& d : demos) {
    nlohmann::ordered_json j;
    j["q"] = d.question;
    j["a"] = d.answer;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace rot::toytasks
