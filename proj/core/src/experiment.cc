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


#include "guidedgen/experiment.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "guidedgen/posterior.h"
#include "guidedgen/records.h"

namespace guidedgen {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void spec_error(const std::string& msg) {
  fail(ErrorCode::kInvalidArgument, "spec: " + msg);
}

void expect_keys(const ojson& j, std::initializer_list<std::string_view> allowed,
                 const std::string& where) {
  if (!j.is_object()) spec_error(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      spec_error("unknown field " + where + "." + key);
    }
  }
}

template <typename T>
T get_or(const ojson& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const ojson::exception&) {
    spec_error("bad type for " + where + "." + key);
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

ModelSpec model_spec_from(const ojson& j, const std::string& where) {
  ModelSpec m;
  m.order = get_or(j, "order", m.order, where);
  m.context_window = get_or(j, "context_window", m.context_window, where);
  if (j.contains("smoothing_grid")) {
    m.smoothing_grid.clear();
    for (const auto& s : j.at("smoothing_grid")) {
      m.smoothing_grid.push_back(parse_smoothing(s.get<std::string>()));
    }
  }
  if (m.smoothing_grid.empty()) spec_error(where + ".smoothing_grid is empty");
  for (const auto& s : m.smoothing_grid) {
    NgramConfig{m.order, s, m.context_window}.validate();
  }
  return m;
}

ojson model_spec_json(const ModelSpec& m) {
  ojson grid = ojson::array();
  for (const auto& s : m.smoothing_grid) grid.push_back(to_string(s));
  return {{"order", m.order}, {"context_window", m.context_window}, {"smoothing_grid", grid}};
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

std::string corpus_id(const fs::path& path) {
  return hex64(fnv1a64(read_file(path)));
}

std::vector<CodedSequence> coded(const std::vector<AttributeText>& records,
                                 const Vocabulary& vocab) {
  std::vector<CodedSequence> out;
  for (const auto& r : records) {
    auto seq = tokenize(r.text, vocab);
    if (!seq.empty()) out.push_back({std::move(seq), code_for(r.label)});
  }
  return out;
}

SplitSpec stratified(SplitSpec s) {
  s.stratified = true;
  return s;
}

std::vector<PairText> test_prompts(const ExperimentSpec& spec) {
  auto parts = split(load_pairs(spec.pairs), spec.split);
  if (spec.max_prompts > 0 && parts.test.size() > spec.max_prompts) {
    parts.test.resize(spec.max_prompts);
  }
  return std::move(parts.test);
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : "+") + n;
  return out;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception&) {
      fail(ErrorCode::kDataLoss, path.string() + ": line " + std::to_string(n) + ": malformed record");
    }
  }
  if (out.empty()) fail(ErrorCode::kInvalidArgument, "empty candidate file: " + path.string());
  return out;
}

// Scores and quality metrics for the candidate records of one control set.
MetricsReport evaluate_records(const std::vector<json>& records,
                               const ModelRegistry& registry,
                               const std::vector<TokenSequence>& train_counters) {
  const Vocabulary& vocab = registry.vocab();
  MetricsReport report;
  std::vector<TokenSequence> hyps, refs, full;
  std::vector<PairRecord> for_ppl;
  std::map<std::size_t, std::vector<TokenSequence>> by_prompt;
  bool have_refs = true;
  std::map<std::string, double> score_sums;
  for (const auto& r : records) {
    auto ids = r.at("tokens").get<std::vector<TokenId>>();
    TokenSequence content{ids};
    if (!content.ids.empty() && content.ids.back() == kEosId) content.ids.pop_back();
    const auto text = r.at("text").get<std::string>();
    hyps.push_back(content);
    by_prompt[r.at("prompt_index").get<std::size_t>()].push_back(content);
    if (r.contains("reference") && r.at("reference").is_string()) {
      refs.push_back(tokenize(r.at("reference").get<std::string>(), vocab));
    } else {
      have_refs = false;
    }
    if (!ids.empty()) {
      for_ppl.push_back({tokenize(r.at("prompt").get<std::string>(), vocab), TokenSequence{ids}, ""});
    }
    for (const auto& a : registry.attributes()) score_sums[a.name] += a.score(text);
  }
  if (have_refs) report.bleu2 = bleu2(hyps, refs);
  double div_sum = 0;
  std::size_t div_groups = 0;
  for (const auto& [prompt, group] : by_prompt) {
    if (group.size() < 2) continue;
    div_sum += diversity(group);
    ++div_groups;
  }
  if (div_groups > 0) report.diversity = div_sum / static_cast<double>(div_groups);
  if (!train_counters.empty()) report.novelty = novelty(hyps, train_counters);
  if (!for_ppl.empty() && !registry.bases().empty()) {
    report.perplexity = response_perplexity(*registry.bases().front().model, for_ppl);
  }
  for (const auto& [name, sum] : score_sums) {
    report.attribute_scores[name] = sum / static_cast<double>(records.size());
  }
  return report;
}

std::vector<TokenSequence> train_counters(const ExperimentSpec& spec,
                                          const Vocabulary& vocab) {
  const auto parts = split(load_pairs(spec.pairs), spec.split);
  std::vector<TokenSequence> out;
  for (const auto& p : parts.train) out.push_back(tokenize(p.counter_speech, vocab));
  return out;
}

}  // namespace

// --- spec ----------------------------------------------------------------------

ExperimentSpec ExperimentSpec::from_json(const ojson& j, const fs::path& base_dir) {
  try {
    expect_keys(j, {"schema", "data", "split", "vocab", "base", "attributes", "loss",
                    "control_sets", "generation", "max_prompts", "out"},
                "spec");
    if (j.value("schema", "") != kExperimentSchema) {
      spec_error("schema must be \"" + std::string(kExperimentSchema) + "\"");
    }
    ExperimentSpec s;
    const ojson& data = j.at("data");
    expect_keys(data, {"pairs"}, "data");
    s.pairs = resolve(base_dir, data.at("pairs").get<std::string>());

    if (j.contains("split")) {
      const ojson& sp = j.at("split");
      expect_keys(sp, {"train", "validation", "test", "seed"}, "split");
      s.split.train = get_or(sp, "train", s.split.train, "split");
      s.split.validation = get_or(sp, "validation", s.split.validation, "split");
      s.split.test = get_or(sp, "test", s.split.test, "split");
      s.split.seed = get_or<std::uint64_t>(sp, "seed", s.split.seed, "split");
      s.split.validate();
    }
    if (j.contains("vocab")) {
      expect_keys(j.at("vocab"), {"min_count"}, "vocab");
      if (j.at("vocab").contains("min_count") && !j.at("vocab").at("min_count").is_null()) {
        s.min_count = j.at("vocab").at("min_count").get<int>();
      }
    }
    if (j.contains("base")) {
      expect_keys(j.at("base"), {"order", "context_window", "smoothing_grid"}, "base");
      s.base = model_spec_from(j.at("base"), "base");
    }
    for (const auto& a : j.at("attributes")) {
      expect_keys(a, {"name", "data", "direction", "order", "context_window",
                      "smoothing_grid", "alpha", "prior"},
                  "attributes[]");
      AttributeSpec as;
      as.name = a.at("name").get<std::string>();
      as.data = resolve(base_dir, a.at("data").get<std::string>());
      as.direction = parse_direction(a.value("direction", "toward-positive"));
      as.model = model_spec_from(a, "attributes." + as.name);
      as.alpha = get_or(a, "alpha", as.alpha, "attributes." + as.name);
      if (a.contains("prior") && !a.at("prior").is_null()) {
        if (a.at("prior").is_string()) {
          if (a.at("prior") != "empirical") spec_error("prior must be a number or \"empirical\"");
        } else {
          as.prior = a.at("prior").get<double>();
        }
      }
      PosteriorConfig{as.alpha, as.prior.value_or(0.5)}.validate();
      s.attributes.push_back(std::move(as));
    }
    if (j.contains("loss")) {
      expect_keys(j.at("loss"), {"lambda"}, "loss");
      s.loss.lambda = get_or(j.at("loss"), "lambda", s.loss.lambda, "loss");
      s.loss.validate();
    }
    for (const auto& c : j.at("control_sets")) {
      expect_keys(c, {"name", "weights"}, "control_sets[]");
      ControlSet set;
      set.name = c.at("name").get<std::string>();
      for (const auto& [name, w] : c.at("weights").items()) {
        set.weights.emplace_back(name, w.get<double>());
      }
      s.control_sets.push_back(std::move(set));
    }
    if (j.contains("generation")) {
      ojson g = j.at("generation");
      if (g.contains("seed")) {
        s.generation.seed = g.at("seed").get<std::uint64_t>();
        g.erase("seed");
      }
      try {
        apply_generation_overrides(s.generation, json(g), "generation");
      } catch (const FieldError& e) {
        spec_error(e.what());
      }
    }
    s.max_prompts = get_or<std::size_t>(j, "max_prompts", 0, "spec");
    s.out = resolve(base_dir, get_or<std::string>(j, "out", "out", "spec"));
    return s;
  } catch (const ojson::exception& e) {
    spec_error(e.what());
  }
}

ExperimentSpec ExperimentSpec::load(const fs::path& path) {
  ojson j;
  try {
    j = ojson::parse(read_file(path));
  } catch (const ojson::parse_error& e) {
    fail(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

ojson ExperimentSpec::to_json() const {
  ojson attrs = ojson::array();
  for (const auto& a : attributes) {
    ojson e = model_spec_json(a.model);
    e["name"] = a.name;
    e["data"] = a.data.generic_string();
    e["direction"] = to_string(a.direction);
    e["alpha"] = a.alpha;
    e["prior"] = a.prior ? ojson(*a.prior) : ojson("empirical");
    attrs.push_back(std::move(e));
  }
  ojson sets = ojson::array();
  for (const auto& c : control_sets) {
    ojson w = ojson::object();
    for (const auto& [name, omega] : c.weights) w[name] = omega;
    sets.push_back({{"name", c.name}, {"weights", w}});
  }
  ojson gen = ojson::parse(guidedgen::to_json(generation).dump());
  gen["seed"] = generation.seed;
  return {{"schema", kExperimentSchema},
          {"data", {{"pairs", pairs.generic_string()}}},
          {"split", {{"train", split.train}, {"validation", split.validation},
                     {"test", split.test}, {"seed", split.seed}}},
          {"vocab", {{"min_count", min_count ? ojson(*min_count) : ojson(nullptr)}}},
          {"base", model_spec_json(base)},
          {"attributes", attrs},
          {"loss", {{"lambda", loss.lambda}}},
          {"control_sets", sets},
          {"generation", gen},
          {"max_prompts", max_prompts},
          {"out", out.generic_string()}};
}

void ExperimentSpec::validate() const {
  if (!fs::exists(pairs)) fail(ErrorCode::kNotFound, "spec: missing dataset " + pairs.string());
  std::set<std::string> names;
  for (const auto& a : attributes) {
    if (!names.insert(a.name).second) spec_error("duplicate attribute " + a.name);
    if (!fs::exists(a.data)) fail(ErrorCode::kNotFound, "spec: missing dataset " + a.data.string());
  }
  std::set<std::string> sets;
  for (const auto& c : control_sets) {
    if (!sets.insert(c.name).second) spec_error("duplicate control set " + c.name);
    std::set<std::string> used;
    for (const auto& [name, omega] : c.weights) {
      if (!names.count(name)) spec_error("control set " + c.name + " uses unknown attribute " + name);
      if (!used.insert(name).second) spec_error("control set " + c.name + " repeats " + name);
      if (!(omega >= 0.0) || !std::isfinite(omega)) {
        spec_error("control set " + c.name + ": weight for " + name + " must be >= 0");
      }
    }
  }
  if (min_count && *min_count < 1) spec_error("vocab.min_count must be >= 1");
  split.validate();
  loss.validate();
  generation.validate();
}

const ControlSet& ExperimentSpec::control_set(std::string_view name) const {
  std::vector<std::string> names;
  for (const auto& c : control_sets) {
    if (c.name == name) return c;
    names.push_back(c.name);
  }
  std::string list;
  for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
  fail(ErrorCode::kNotFound,
       "unknown control set '" + std::string(name) + "'; available: " + list);
}

// --- train -------------------------------------------------------------------------

TrainSummary cmd_train(const ExperimentSpec& spec) {
  spec.validate();
  const auto pair_parts = split(load_pairs(spec.pairs), spec.split);
  if (pair_parts.train.empty() || pair_parts.validation.empty()) {
    fail(ErrorCode::kInvalidArgument, "spec: pairs split leaves train or validation empty");
  }
  std::vector<Partition<AttributeText>> attr_parts;
  for (const auto& a : spec.attributes) {
    attr_parts.push_back(split(load_attributes(a.data), stratified(spec.split)));
  }

  // One vocabulary over every training text.
  std::vector<std::vector<std::string>> corpus;
  for (const auto& p : pair_parts.train) {
    corpus.push_back(tokenize(p.hate_speech));
    corpus.push_back(tokenize(p.counter_speech));
  }
  for (const auto& parts : attr_parts) {
    for (const auto& r : parts.train) corpus.push_back(tokenize(r.text));
  }
  const int min_count = spec.min_count.value_or(default_min_count(corpus.size()));
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(corpus, min_count));

  json report = {{"schema", "guidedgen-train-report/1"},
                 {"vocab", {{"size", vocab->size()}, {"min_count", min_count},
                            {"hash", hex64(vocab->hash())}}},
                 {"loss_lambda", spec.loss.lambda}};

  ModelRegistry registry(vocab);

  // Base model: smoothing chosen by validation response perplexity.
  {
    std::vector<PairRecord> train, valid;
    for (const auto& p : pair_parts.train) train.push_back(encode(p, *vocab));
    for (const auto& p : pair_parts.validation) valid.push_back(encode(p, *vocab));
    json candidates = json::array();
    std::optional<NgramModel> best;
    double best_ppl = 0;
    for (const auto& s : spec.base.smoothing_grid) {
      NgramModel m = train_base_lm(*vocab, train, {spec.base.order, s, spec.base.context_window});
      const double ppl = response_perplexity(m, valid);
      candidates.push_back({{"smoothing", to_string(s)}, {"validation_perplexity", ppl}});
      if (!best || ppl < best_ppl) {
        best = std::move(m);
        best_ppl = ppl;
      }
    }
    report["base"] = {{"order", spec.base.order},
                      {"candidates", candidates},
                      {"chosen", to_string(best->config().smoothing)},
                      {"train_pairs", train.size()},
                      {"validation_pairs", valid.size()}};
    registry.add_base({"base", std::make_shared<const NgramModel>(std::move(*best)),
                       corpus_id(spec.pairs)});
  }

  // Attribute models: smoothing chosen by validation L_gd.
  report["attributes"] = json::array();
  for (std::size_t i = 0; i < spec.attributes.size(); ++i) {
    const auto& a = spec.attributes[i];
    const auto& parts = attr_parts[i];
    const auto train = coded(parts.train, *vocab);
    const auto valid = coded(parts.validation, *vocab);
    if (valid.empty()) {
      fail(ErrorCode::kInvalidArgument, "attribute " + a.name + ": empty validation split");
    }
    std::vector<Label> labels;
    for (const auto& r : parts.train) labels.push_back(r.label);
    const PosteriorConfig posterior{a.alpha, a.prior ? *a.prior : estimate_prior(labels)};

    json candidates = json::array();
    std::optional<NgramModel> best;
    double best_loss = 0;
    for (const auto& s : a.model.smoothing_grid) {
      NgramModel m = train_cclm(*vocab, train, {a.model.order, s, a.model.context_window});
      const Losses l = losses(m, valid, posterior, spec.loss);
      candidates.push_back({{"smoothing", to_string(s)},
                            {"generative", l.generative},
                            {"discriminative", l.discriminative},
                            {"combined", l.combined}});
      if (!best || l.combined < best_loss) {
        best = std::move(m);
        best_loss = l.combined;
      }
    }

    // Discriminator quality on the test split.
    json classifier = nullptr;
    {
      std::vector<double> scores;
      std::vector<int> truth;
      for (const auto& r : coded(parts.test, *vocab)) {
        scores.push_back(std::exp(sequence_log_posterior(*best, r.tokens.ids, ControlCode::kTrue, posterior)));
        truth.push_back(r.code == ControlCode::kTrue ? 1 : 0);
      }
      const bool both = std::count(truth.begin(), truth.end(), 1) > 0 &&
                        std::count(truth.begin(), truth.end(), 0) > 0;
      if (both) {
        const auto m = classifier_metrics(scores, truth);
        classifier = {{"f1", m.f1}, {"accuracy", m.accuracy}, {"auroc", m.auroc}};
      }
    }

    // The scorer sees only records the discriminator never trained on.
    std::vector<AttributeText> held_out = parts.validation;
    held_out.insert(held_out.end(), parts.test.begin(), parts.test.end());
    auto scorer = std::make_shared<const BowScorer>(BowScorer::train(held_out));

    report["attributes"].push_back({{"name", a.name},
                                    {"direction", to_string(a.direction)},
                                    {"order", a.model.order},
                                    {"alpha", posterior.alpha},
                                    {"prior", posterior.prior_pos},
                                    {"candidates", candidates},
                                    {"chosen", to_string(best->config().smoothing)},
                                    {"test_classifier", classifier},
                                    {"scorer_hash", hex64(scorer->hash())}});
    AttributeEntry entry;
    entry.name = a.name;
    entry.model = std::make_shared<const NgramModel>(std::move(*best));
    entry.posterior = posterior;
    entry.direction = a.direction;
    entry.scorer = std::move(scorer);
    entry.corpus_id = corpus_id(a.data);
    registry.add_attribute(std::move(entry));
  }

  registry.save(spec.models_dir());
  report["registry"] = registry.fingerprint();
  const fs::path report_path = spec.reports_dir() / "train_report.json";
  write_file(report_path, report.dump(2) + "\n");
  return {spec.models_dir(), report_path, report};
}

// --- generate ----------------------------------------------------------------------

GenerateSummary generate_candidates(const ExperimentSpec& spec,
                                    const ModelRegistry& registry,
                                    const ControlSet& set, const fs::path& dir) {
  if (registry.bases().empty()) fail(ErrorCode::kFailedPrecondition, "no base model trained");
  const Vocabulary& vocab = registry.vocab();
  const auto base = registry.bases().front().model;
  std::vector<AttributeControl> controls;
  json weights = json::object();
  for (const auto& [name, omega] : set.weights) {
    const AttributeEntry* a = registry.find_attribute(name);
    if (a == nullptr) fail(ErrorCode::kNotFound, "control set " + set.name + ": no attribute " + name);
    controls.push_back(a->control(omega));
    weights[name] = omega;
  }
  const auto prompts = test_prompts(spec);
  if (prompts.empty()) fail(ErrorCode::kInvalidArgument, "spec: test split is empty");

  json gen = to_json(spec.generation);
  gen["seed"] = spec.generation.seed;
  const json key = {{"registry", registry.fingerprint()}, {"set", set.name},
                    {"weights", weights},                 {"generation", gen},
                    {"split", {{"train", spec.split.train}, {"validation", spec.split.validation},
                               {"test", spec.split.test}, {"seed", spec.split.seed}}},
                    {"max_prompts", spec.max_prompts}};
  const fs::path file = dir / (set.name + "-" + hex64(fnv1a64(key.dump())) + ".jsonl");

  std::ostringstream out;
  std::size_t count = 0;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    const TokenSequence prompt = tokenize(prompts[p].hate_speech, vocab);
    GenerationConfig cfg = spec.generation;
    cfg.seed = prompt_seed(spec.generation.seed, p);
    for (const auto& trace : generate(base, prompt, controls, cfg)) {
      const auto content = trace.content();
      const std::string text = detokenize(content, vocab);
      json posteriors = json::object();
      for (const auto& [name, v] : mean_posteriors(trace, controls)) {
        posteriors[name] = v ? json(*v) : json(nullptr);
      }
      const json record = {{"control_set", set.name},
                           {"weights", weights},
                           {"prompt_id", prompts[p].id},
                           {"prompt_index", p},
                           {"prompt", prompts[p].hate_speech},
                           {"reference", prompts[p].counter_speech},
                           {"seed", cfg.seed},
                           {"index", trace.index},
                           {"text", text},
                           {"tokens", trace.tokens.ids},
                           {"terminated_by", to_string(trace.terminated_by)},
                           {"mean_posteriors", posteriors},
                           {"digest", candidate_digest(text, trace.tokens.ids)},
                           {"steps", steps_json(trace)}};
      out << record.dump() << '\n';
      ++count;
    }
  }
  write_file(file, out.str());
  return {file, prompts.size(), count};
}

GenerateSummary cmd_generate(const ExperimentSpec& spec, std::string_view control_set) {
  spec.validate();
  const ControlSet& set = spec.control_set(control_set);
  const ModelRegistry registry = ModelRegistry::load(spec.models_dir());
  return generate_candidates(spec, registry, set, spec.candidates_dir());
}

// --- eval ----------------------------------------------------------------------------

EvalSummary cmd_eval(const ExperimentSpec& spec, std::vector<fs::path> files) {
  const ModelRegistry registry = ModelRegistry::load(spec.models_dir());
  if (files.empty()) {
    if (fs::is_directory(spec.candidates_dir())) {
      for (const auto& e : fs::directory_iterator(spec.candidates_dir())) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorCode::kNotFound, "no candidate files in " + spec.candidates_dir().string());
  }
  const auto counters = train_counters(spec, registry.vocab());

  // Records grouped by control set, sets kept in first-seen order.
  std::vector<std::pair<std::string, std::vector<json>>> groups;
  for (const auto& f : files) {
    for (auto& r : read_jsonl(f)) {
      const auto name = r.at("control_set").get<std::string>();
      auto it = std::find_if(groups.begin(), groups.end(),
                             [&](const auto& g) { return g.first == name; });
      if (it == groups.end()) {
        groups.emplace_back(name, std::vector<json>{});
        it = groups.end() - 1;
      }
      it->second.push_back(std::move(r));
    }
  }

  // Experiment order first, then sets the experiment file does not name.
  auto rank = [&](const std::string& name) {
    for (std::size_t i = 0; i < spec.control_sets.size(); ++i) {
      if (spec.control_sets[i].name == name) return i;
    }
    return spec.control_sets.size();
  };
  std::stable_sort(groups.begin(), groups.end(),
                   [&](const auto& a, const auto& b) { return rank(a.first) < rank(b.first); });

  EvalSummary summary;
  json reports = json::array();
  for (const auto& [name, records] : groups) {
    MetricsReport r = evaluate_records(records, registry, counters);
    reports.push_back({{"control_set", name}, {"candidates", records.size()}, {"metrics", r.to_json()}});
    summary.reports.emplace_back(name, std::move(r));
  }
  json scorers = json::object();
  for (const auto& a : registry.attributes()) scorers[a.name] = hex64(a.scorer->hash());
  const json doc = {{"schema", "guidedgen-eval/1"},
                    {"registry", registry.fingerprint()},
                    {"scorers", scorers},
                    {"reports", reports}};
  summary.table = format_table(summary.reports);
  write_file(spec.reports_dir() / "eval.json", doc.dump(2) + "\n");
  write_file(spec.reports_dir() / "eval_table.txt", summary.table);
  return summary;
}

// --- ablate ----------------------------------------------------------------------------

AblationSummary cmd_ablate(const ExperimentSpec& spec, std::optional<std::string> control_set) {
  spec.validate();
  const ControlSet* full = nullptr;
  if (control_set) {
    full = &spec.control_set(*control_set);
  } else {
    for (const auto& c : spec.control_sets) {
      if (c.weights.size() == 3) {
        full = &c;
        break;
      }
    }
  }
  if (full == nullptr || full->weights.size() != 3) {
    fail(ErrorCode::kInvalidArgument, "ablation needs a control set with exactly three attributes");
  }
  const ModelRegistry registry = ModelRegistry::load(spec.models_dir());
  const fs::path dir = spec.candidates_dir() / "ablation";
  const auto counters = train_counters(spec, registry.vocab());

  auto scores_of = [&](const ControlSet& set) {
    const auto gen = generate_candidates(spec, registry, set, dir);
    return evaluate_records(read_jsonl(gen.file), registry, counters).attribute_scores;
  };
  const auto full_scores = scores_of(*full);

  AblationSummary summary;
  summary.full_set = full->name;
  json rows = json::array();
  std::vector<std::pair<std::string, MetricsReport>> columns;
  for (std::size_t drop = 3; drop-- > 0;) {
    ControlSet pair;
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < 3; ++i) {
      if (i == drop) continue;
      kept.push_back(full->weights[i].first);
      pair.weights.emplace_back(full->weights[i].first, kDoubleAttributeWeight);
    }
    pair.name = join_names(kept);
    const std::string dropped = full->weights[drop].first;
    const auto scores = scores_of(pair);
    AblationRow row{pair.name, dropped, scores.at(dropped), full_scores.at(dropped),
                    hex64(registry.find_attribute(dropped)->scorer->hash())};
    rows.push_back({{"subset", row.subset},
                    {"dropped", row.dropped},
                    {"dropped_score", row.dropped_score},
                    {"full_score", row.full_score},
                    {"scorer_hash", row.scorer_hash}});
    MetricsReport col;
    col.attribute_scores[dropped] = row.dropped_score;
    columns.emplace_back(pair.name, std::move(col));
    summary.rows.push_back(std::move(row));
  }
  MetricsReport full_col;
  full_col.attribute_scores = full_scores;
  columns.emplace_back(full->name, std::move(full_col));
  summary.table = format_table(columns);
  const json doc = {{"schema", "guidedgen-ablation/1"},
                    {"registry", registry.fingerprint()},
                    {"full_set", full->name},
                    {"rows", rows}};
  write_file(spec.reports_dir() / "ablation.json", doc.dump(2) + "\n");
  return summary;
}

// --- demo ------------------------------------------------------------------------------

fs::path write_demo_workspace(const fs::path& dir, const SyntheticOptions& options) {
  const SyntheticCorpora corpora = make_synthetic_corpora(options);
  {
    std::ostringstream out;
    for (const auto& p : corpora.pairs) {
      out << json{{"id", p.id}, {"hate_speech", p.hate_speech}, {"counter_speech", p.counter_speech}}.dump()
          << '\n';
    }
    write_file(dir / "data" / "pairs.jsonl", out.str());
  }
  ojson attributes = ojson::array();
  for (const auto& a : corpora.attributes) {
    std::ostringstream out;
    for (const auto& r : a.records) {
      out << json{{"text", r.text}, {"label", to_string(r.label)}}.dump() << '\n';
    }
    write_file(dir / "data" / (a.dataset + ".jsonl"), out.str());
    attributes.push_back({{"name", a.name},
                          {"data", "data/" + a.dataset + ".jsonl"},
                          {"direction", to_string(a.direction)},
                          {"order", 3},
                          {"smoothing_grid", {"add-k:0.1", "add-k:0.5", "discount:0.75"}},
                          {"alpha", 1.0},
                          {"prior", "empirical"}});
  }
  ojson gen = ojson::parse(to_json(GenerationConfig{}).dump());
  gen["seed"] = 0;
  const ojson spec = {
      {"schema", kExperimentSchema},
      {"data", {{"pairs", "data/pairs.jsonl"}}},
      {"split", {{"train", 0.8}, {"validation", 0.1}, {"test", 0.1}, {"seed", options.seed}}},
      {"vocab", {{"min_count", 1}}},
      {"base", {{"order", 3}, {"smoothing_grid", {"add-k:0.01", "add-k:0.1", "discount:0.75"}}}},
      {"attributes", attributes},
      {"loss", {{"lambda", 0.8}}},
      {"control_sets",
       {{{"name", "none"}, {"weights", ojson::object()}},
        {{"name", "polite"}, {"weights", {{"polite", kSingleAttributeWeight}}}},
        {{"name", "detox"}, {"weights", {{"detox", kSingleAttributeWeight}}}},
        {{"name", "joy"}, {"weights", {{"joy", kSingleAttributeWeight}}}},
        {{"name", "polite+detox"},
         {"weights", {{"polite", kDoubleAttributeWeight}, {"detox", kDoubleAttributeWeight}}}},
        {{"name", "joy+polite+detox"},
         {"weights", {{"joy", kTripleEmotionWeight}, {"polite", kTripleStyleWeight},
                      {"detox", kTripleStyleWeight}}}}}},
      {"generation", gen},
      {"max_prompts", 50},
      {"out", "out"}};
  const fs::path spec_path = dir / "spec.json";
  write_file(spec_path, spec.dump(2) + "\n");
  return spec_path;
}

}  // namespace guidedgen
