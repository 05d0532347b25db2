// Copyright 2026 The guidedgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "guidedgen/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace guidedgen {
namespace {

constexpr std::string_view kBowMagic = "guidedgen-bow";
constexpr int kBowFormatVersion = 1;

std::vector<TokenId> sorted_set(std::span<const TokenId> seq) {
  std::vector<TokenId> s(seq.begin(), seq.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

double jaccard_sorted(const std::vector<TokenId>& a,
                      const std::vector<TokenId>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::vector<TokenId>> sets_of(std::span<const TokenSequence> s) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(s.size());
  for (const auto& seq : s) out.push_back(sorted_set(seq.ids));
  return out;
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

}  // namespace

double jaccard(std::span<const TokenId> a, std::span<const TokenId> b) {
  return jaccard_sorted(sorted_set(a), sorted_set(b));
}

double diversity(std::span<const TokenSequence> sentences) {
  if (sentences.size() < 2) {
    fail(ErrorCode::kInvalidArgument, "diversity needs at least 2 sentences");
  }
  const auto sets = sets_of(sentences);
  double sum = 0.0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    double best = 0.0;
    for (std::size_t j = 0; j < sets.size(); ++j) {
      if (j != i) best = std::max(best, jaccard_sorted(sets[i], sets[j]));
    }
    sum += 1.0 - best;
  }
  return sum / static_cast<double>(sets.size());
}

double novelty(std::span<const TokenSequence> sentences,
               std::span<const TokenSequence> reference) {
  if (reference.empty()) {
    fail(ErrorCode::kInvalidArgument, "novelty needs a reference corpus");
  }
  if (sentences.empty()) {
    fail(ErrorCode::kInvalidArgument, "novelty needs at least 1 sentence");
  }
  const auto sets = sets_of(sentences);
  const auto refs = sets_of(reference);
  double sum = 0.0;
  for (const auto& s : sets) {
    double best = 0.0;
    for (const auto& r : refs) best = std::max(best, jaccard_sorted(s, r));
    sum += 1.0 - best;
  }
  return sum / static_cast<double>(sets.size());
}

double bleu2(std::span<const TokenSequence> hypotheses,
             std::span<const TokenSequence> references) {
  if (hypotheses.empty()) fail(ErrorCode::kInvalidArgument, "bleu2: empty input");
  if (hypotheses.size() != references.size()) {
    fail(ErrorCode::kInvalidArgument, "bleu2: hypotheses and references differ in length");
  }
  std::array<std::size_t, 2> matched{};
  std::array<std::size_t, 2> proposed{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& hyp = hypotheses[s].ids;
    const auto& ref = references[s].ids;
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= 2; ++n) {
      std::map<std::vector<TokenId>, std::size_t> ref_counts;
      for (std::size_t i = 0; i + n <= ref.size(); ++i) {
        ++ref_counts[{ref.begin() + static_cast<std::ptrdiff_t>(i),
                      ref.begin() + static_cast<std::ptrdiff_t>(i + n)}];
      }
      std::map<std::vector<TokenId>, std::size_t> hyp_counts;
      for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
        ++hyp_counts[{hyp.begin() + static_cast<std::ptrdiff_t>(i),
                      hyp.begin() + static_cast<std::ptrdiff_t>(i + n)}];
        ++proposed[n - 1];
      }
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (hyp_len == 0 || proposed[1] == 0 || matched[0] == 0 || matched[1] == 0) {
    return 0.0;
  }
  const double p1 = static_cast<double>(matched[0]) / static_cast<double>(proposed[0]);
  const double p2 = static_cast<double>(matched[1]) / static_cast<double>(proposed[1]);
  const double bp =
      hyp_len > ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::sqrt(p1 * p2);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    fail(ErrorCode::kInvalidArgument, "auroc: scores and labels must align");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over ties (1-based).
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) {
        pos_rank_sum += avg_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) {
    fail(ErrorCode::kInvalidArgument, "auroc undefined: labels contain one class");
  }
  const double p = static_cast<double>(pos);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

ClassifierMetrics classifier_metrics(std::span<const double> scores,
                                     std::span<const int> labels,
                                     double threshold) {
  ClassifierMetrics m;
  m.auroc = auroc(scores, labels);
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++tp;
    if (predicted && !actual) ++fp;
    if (!predicted && !actual) ++tn;
    if (!predicted && actual) ++fn;
  }
  auto f1 = [](std::size_t t, std::size_t f_pos, std::size_t f_neg) {
    const std::size_t denom = 2 * t + f_pos + f_neg;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(t) / static_cast<double>(denom);
  };
  m.f1 = 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp));
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
  return m;
}

// --- BowScorer -----------------------------------------------------------------

BowScorer BowScorer::train(std::span<const AttributeText> data) {
  std::map<std::string, std::array<std::size_t, 2>> counts;
  std::array<std::size_t, 2> totals{};
  std::array<std::size_t, 2> docs{};
  for (const auto& r : data) {
    const auto cls = static_cast<std::size_t>(r.label);
    ++docs[cls];
    for (auto& tok : tokenize(r.text)) {
      ++counts[tok][cls];
      ++totals[cls];
    }
  }
  if (docs[0] == 0 || docs[1] == 0) {
    fail(ErrorCode::kInvalidArgument, "bag-of-words scorer needs both labels");
  }
  BowScorer s;
  s.prior_logit_ = std::log(static_cast<double>(docs[1]) / static_cast<double>(docs[0]));
  const auto types = static_cast<double>(counts.size());
  const double pos_denom = static_cast<double>(totals[1]) + types;
  const double neg_denom = static_cast<double>(totals[0]) + types;
  for (const auto& [tok, c] : counts) {
    s.weights_[tok] = std::log((static_cast<double>(c[1]) + 1.0) / pos_denom) -
                      std::log((static_cast<double>(c[0]) + 1.0) / neg_denom);
  }
  return s;
}

double BowScorer::weight(const std::string& token) const {
  auto it = weights_.find(token);
  return it == weights_.end() ? 0.0 : it->second;
}

double BowScorer::score_tokens(std::span<const std::string> tokens) const {
  double z = prior_logit_;
  for (const auto& t : tokens) z += weight(t);
  return logistic(z);
}

double BowScorer::score(std::string_view text) const {
  const auto tokens = tokenize(text);
  return score_tokens(tokens);
}

void BowScorer::write(std::ostream& out) const {
  out << kBowMagic << ' ' << kBowFormatVersion << '\n';
  out << "prior " << format_double(prior_logit_) << '\n';
  out << "weights " << weights_.size() << '\n';
  for (const auto& [tok, w] : weights_) out << tok << '\t' << format_double(w) << '\n';
}

BowScorer BowScorer::read(std::istream& in) {
  auto bad = [](const std::string& what) {
    fail(ErrorCode::kDataLoss, "scorer file: " + what);
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kBowMagic) bad("bad header");
  if (version != kBowFormatVersion) bad("unsupported format version");
  BowScorer s;
  std::string key;
  std::size_t n = 0;
  if (!(in >> key >> s.prior_logit_) || key != "prior") bad("missing prior");
  if (!(in >> key >> n) || key != "weights") bad("missing weights");
  in.ignore(1);
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) bad("truncated");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) bad("bad weight line");
    try {
      s.weights_[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
    } catch (const std::logic_error&) {
      bad("bad weight value");
    }
  }
  return s;
}

void BowScorer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  write(out);
}

BowScorer BowScorer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return read(in);
}

std::uint64_t BowScorer::hash() const {
  std::ostringstream os;
  write(os);
  return fnv1a64(os.str());
}

// --- reports -------------------------------------------------------------------

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["bleu2"] = optional_json(bleu2);
  j["meteor"] = nullptr;
  j["cola"] = nullptr;
  j["diversity"] = optional_json(diversity);
  j["novelty"] = optional_json(novelty);
  j["perplexity"] = optional_json(perplexity);
  j["attribute_scores"] = nlohmann::json::object();
  for (const auto& [name, v] : attribute_scores) j["attribute_scores"][name] = v;
  if (classifier) {
    j["classifier"] = {{"f1", classifier->f1},
                       {"accuracy", classifier->accuracy},
                       {"auroc", classifier->auroc}};
  } else {
    j["classifier"] = nullptr;
  }
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.bleu2 = optional_from(j, "bleu2");
  r.diversity = optional_from(j, "diversity");
  r.novelty = optional_from(j, "novelty");
  r.perplexity = optional_from(j, "perplexity");
  if (auto it = j.find("attribute_scores"); it != j.end() && it->is_object()) {
    for (const auto& [name, v] : it->items()) r.attribute_scores[name] = v.get<double>();
  }
  if (auto it = j.find("classifier"); it != j.end() && it->is_object()) {
    r.classifier = ClassifierMetrics{it->at("f1").get<double>(),
                                     it->at("accuracy").get<double>(),
                                     it->at("auroc").get<double>()};
  }
  return r;
}

std::string format_table(
    std::span<const std::pair<std::string, MetricsReport>> columns) {
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  auto add_row = [&](const std::string& label, auto&& cell) {
    std::vector<std::string> cells;
    for (const auto& [name, report] : columns) cells.push_back(cell(report));
    rows.emplace_back(label, std::move(cells));
  };
  auto opt = [](const std::optional<double>& v, int digits) {
    return v ? fixed(*v, digits) : std::string("null");
  };
  add_row("BLEU-2", [&](const MetricsReport& r) { return opt(r.bleu2, 1); });
  add_row("METEOR", [](const MetricsReport&) { return std::string("null"); });
  add_row("COLA", [](const MetricsReport&) { return std::string("null"); });
  add_row("Diversity", [&](const MetricsReport& r) { return opt(r.diversity, 3); });
  add_row("Novelty", [&](const MetricsReport& r) { return opt(r.novelty, 3); });
  add_row("Perplexity", [&](const MetricsReport& r) { return opt(r.perplexity, 2); });
  std::set<std::string> attributes;
  for (const auto& [name, report] : columns) {
    for (const auto& [attr, v] : report.attribute_scores) attributes.insert(attr);
  }
  for (const auto& attr : attributes) {
    add_row(attr, [&](const MetricsReport& r) {
      auto it = r.attribute_scores.find(attr);
      return it == r.attribute_scores.end() ? std::string("--") : fixed(it->second, 3);
    });
  }
  const bool any_classifier =
      std::any_of(columns.begin(), columns.end(),
                  [](const auto& c) { return c.second.classifier.has_value(); });
  if (any_classifier) {
    auto cls = [](auto member) {
      return [member](const MetricsReport& r) {
        return r.classifier ? fixed((*r.classifier).*member, 3) : std::string("--");
      };
    };
    add_row("F1", cls(&ClassifierMetrics::f1));
    add_row("Accuracy", cls(&ClassifierMetrics::accuracy));
    add_row("AUROC", cls(&ClassifierMetrics::auroc));
  }

  std::size_t label_width = std::string("Metric").size();
  for (const auto& [label, cells] : rows) label_width = std::max(label_width, label.size());
  std::vector<std::size_t> widths;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::size_t w = columns[c].first.size();
    for (const auto& [label, cells] : rows) w = std::max(w, cells[c].size());
    widths.push_back(w);
  }
  std::ostringstream os;
  auto emit = [&](const std::string& label, const std::vector<std::string>& cells) {
    os << std::left << std::setw(static_cast<int>(label_width)) << label;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      os << " | " << std::right << std::setw(static_cast<int>(widths[c])) << cells[c];
    }
    os << '\n';
  };
  std::vector<std::string> header;
  for (const auto& [name, report] : columns) header.push_back(name);
  emit("Metric", header);
  os << std::string(label_width, '-');
  for (std::size_t w : widths) os << "-+-" << std::string(w, '-');
  os << '\n';
  for (const auto& [label, cells] : rows) emit(label, cells);
  return os.str();
}

}  // namespace guidedgen
