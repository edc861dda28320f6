#include "rot/localization.hpp"

#include <cstdio>

#include "rot/error.hpp"

namespace rot::localization {

PrefixScores score_activations(const ActivationFn& activation, std::size_t positions,
                               const reading::ReadingVectorSet& readers, double delta) {
  if (readers.vectors.empty()) throw Error(Errc::LayerMismatch, "no reading vectors");
  PrefixScores out;
  out.delta = delta;
  out.layers = readers.layers();
  out.per_layer.resize(positions);
  out.mean.resize(positions);
  for (std::size_t i = 0; i < positions; ++i) {
    auto& row = out.per_layer[i];
    double sum = 0.0;
    for (int k : out.layers) {
      const auto h = activation(k, i);
      const double s = linalg::dot(h, readers.at(k)) - delta;
      row.push_back(s);
      sum += s;
    }
    out.mean[i] = sum / static_cast<double>(row.size());
  }
  return out;
}

PrefixScores score_prefixes(const model::ToyTransformer& model, std::span<const TokenId> prompt,
                            std::span<const TokenId> response,
                            const reading::ReadingVectorSet& readers, double delta) {
  if (response.empty()) throw Error(Errc::EmptyResponse, "response has no tokens");
  if (prompt.empty()) throw Error(Errc::EmptyPrompt, "prompt has no tokens");
  const auto& cfg = model.config();
  for (const auto& [k, v] : readers.vectors) {
    if (k < 1 || k > cfg.layers) {
      throw Error(Errc::LayerMismatch, "reader layer " + std::to_string(k) + " outside 1.." +
                                           std::to_string(cfg.layers));
    }
    if (v.size() != static_cast<std::size_t>(cfg.hidden)) {
      throw Error(Errc::LayerMismatch, "reader width differs from the model hidden size");
    }
  }
  std::vector<TokenId> all(prompt.begin(), prompt.end());
  all.insert(all.end(), response.begin(), response.end());
  const auto fwd = model::forward_with_taps(model, all, nullptr, false);
  const std::size_t base = prompt.size() - 1;
  return score_activations(
      [&](int k, std::size_t i) {
        const auto h = fwd.trace.at(k, base + i);
        return std::vector<double>(h.begin(), h.end());
      },
      response.size() + 1, readers, delta);
}

std::string prefix_record_id(const std::string& item, std::size_t i) {
  return item + "@" + std::to_string(i);
}

PrefixScores score_prefixes(const populations::ActivationDump& dump, const std::string& item,
                            std::size_t response_length,
                            const reading::ReadingVectorSet& readers, double delta) {
  if (response_length == 0) throw Error(Errc::EmptyResponse, "response has no tokens");
  if (readers.hidden() != dump.hidden) {
    throw Error(Errc::LayerMismatch, "reader width differs from the dump hidden size");
  }
  populations::DumpSource source(dump);
  return score_activations(
      [&](int k, std::size_t i) {
        return source.last_token(prefix_record_id(item, i), populations::Polarity::Positive, {}, {k})[0];
      },
      response_length + 1, readers, delta);
}

std::vector<bool> zero_crossings(std::span<const double> mean) {
  std::vector<bool> marks;
  for (std::size_t i = 1; i < mean.size(); ++i) marks.push_back(mean[i] < 0.0 && mean[i - 1] >= 0.0);
  return marks;
}

std::size_t SalienceReport::mark_count() const {
  std::size_t n = 0;
  for (const auto& t : tokens) n += t.mark == Mark::ReasoningError ? 1 : 0;
  return n;
}

SalienceReport localize(const PrefixScores& scores, const std::vector<std::string>& tokens,
                        const std::string& prompt) {
  if (scores.mean.empty() || tokens.size() != scores.response_length()) {
    throw Error(Errc::LengthMismatch, "scores cover " + std::to_string(scores.response_length()) +
                                          " tokens, response has " + std::to_string(tokens.size()));
  }
  SalienceReport r;
  r.prompt = prompt;
  r.baseline = scores.mean[0];
  r.delta = scores.delta;
  r.layers = scores.layers;
  const auto marks = zero_crossings(scores.mean);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    r.tokens.push_back({tokens[i], scores.mean[i + 1], marks[i] ? Mark::ReasoningError : Mark::Ok});
  }
  return r;
}

Format parse_format(const std::string& name) {
  if (name == "plain" || name == "tsv") return Format::Plain;
  if (name == "ansi" || name == "txt") return Format::Ansi;
  if (name == "html") return Format::Html;
  throw Error(Errc::ConfigError, "unknown report format '" + name + "'");
}

const char* format_extension(Format f) {
  switch (f) {
    case Format::Plain: return "tsv";
    case Format::Ansi: return "txt";
    case Format::Html: return "html";
  }
  return "txt";
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string layer_list(const std::vector<int>& layers) {
  std::string s;
  for (int k : layers) s += (s.empty() ? "" : ",") + std::to_string(k);
  return s;
}

std::string tsv_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else if (c == '\\') out += "\\\\";
    else out += c;
  }
  return out;
}

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_plain(const SalienceReport& r) {
  std::string out = "token\tscore\tmark\n";
  for (const auto& t : r.tokens) {
    out += tsv_escape(t.text) + "\t" + fmt(t.score) + "\t" +
           (t.mark == Mark::ReasoningError ? "reasoning_error" : "ok") + "\n";
  }
  return out;
}

std::string render_ansi(const SalienceReport& r) {
  std::string out = "delta " + fmt(r.delta) + "  layers " + layer_list(r.layers) + "  baseline " +
                    fmt(r.baseline) + "\n";
  if (!r.prompt.empty()) out += r.prompt + "\n";
  bool first = true;
  for (const auto& t : r.tokens) {
    if (!first) out += ' ';
    first = false;
    out += t.mark == Mark::ReasoningError ? "\x1b[1;31m" : "\x1b[32m";
    out += t.text + "\x1b[0m\x1b[2m(" + fmt(t.score) + ")\x1b[0m";
  }
  out += "\n";
  return out;
}

std::string render_html(const SalienceReport& r) {
  std::string out =
      "<!DOCTYPE html>\n"
      "<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Reasoning error localization</title>\n"
      "<style>\n"
      "body { font-family: monospace; max-width: 60em; margin: 2em auto; }\n"
      ".ok { color: #176317; }\n"
      ".error { color: #ffffff; background: #c0392b; }\n"
      ".meta { color: #666666; }\n"
      "</style>\n</head>\n<body>\n";
  out += "<p class=\"meta\">delta = " + fmt(r.delta) + "; layers = " + layer_list(r.layers) +
         "; baseline score = " + fmt(r.baseline) + "; marked = " + std::to_string(r.mark_count()) +
         "</p>\n";
  out += "<pre class=\"prompt\">" + html_escape(r.prompt) + "</pre>\n<p class=\"response\">";
  bool first = true;
  for (const auto& t : r.tokens) {
    if (!first) out += ' ';
    first = false;
    out += std::string("<span class=\"") + (t.mark == Mark::ReasoningError ? "error" : "ok") +
           "\" title=\"" + fmt(t.score) + "\">" + html_escape(t.text) + "</span>";
  }
  out += "</p>\n</body>\n</html>\n";
  return out;
}

}  // namespace

std::string render_report(const SalienceReport& report, Format format) {
  switch (format) {
    case Format::Plain: return render_plain(report);
    case Format::Ansi: return render_ansi(report);
    case Format::Html: return render_html(report);
  }
  return {};
}

}  // namespace rot::localization
