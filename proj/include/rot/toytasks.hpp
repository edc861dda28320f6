#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rot/eval.hpp"
#include "rot/stimuli.hpp"

// Seeded generators for the bundled desk-scale tasks.
namespace rot::toytasks {

// coin-parity (yes_no), letter-pick (letters), add-small (number).
const std::vector<std::string>& names();
eval::TaskKind kind_of(std::string_view task);  // ConfigError for unknown tasks

std::vector<stimuli::Query> generate(std::string_view task, std::size_t count, std::uint64_t seed);
std::vector<stimuli::Demonstration> demonstrations(std::string_view task, std::size_t count,
                                                   std::uint64_t seed);

std::string queries_to_jsonl(const std::vector<stimuli::Query>& queries);
std::string demos_to_jsonl(const std::vector<stimuli::Demonstration>& demos);

}  // namespace rot::toytasks
