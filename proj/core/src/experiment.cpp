// Copyright 2026 The fmfldp Authors
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

#include "fmfldp/experiment.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fmfldp/rng.hpp"
#include "fmfldp/server.hpp"

namespace fmfldp::experiment {
namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  while (true) {
    const auto pos = s.find(sep);
    parts.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return parts;
}

template <typename T>
T parse_number(const std::string& value, const std::string& what) {
  T parsed{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, parsed);
  if (ec != std::errc() || ptr != last || value.empty()) {
    throw std::runtime_error("cannot parse " + what + " from '" + value + "'");
  }
  return parsed;
}

std::string to_string_shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    throw std::runtime_error("number formatting failed");
  }
  return std::string(buf, ptr);
}

std::string fixed6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::optional<std::size_t> parse_optional_size(const std::string& value,
                                               const std::string& what) {
  if (value == "full") return std::nullopt;
  const auto parsed = parse_number<std::size_t>(value, what);
  if (parsed == 0) {
    throw std::runtime_error(what + " must be positive or 'full'");
  }
  return parsed;
}

std::string optional_size_to_string(const std::optional<std::size_t>& v) {
  return v ? std::to_string(*v) : "full";
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& value, Parse parse) {
  std::vector<T> out;
  if (trim(value).empty()) return out;
  for (const std::string& part : split(value, ',')) {
    out.push_back(parse(part));
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_size_pairs(const std::string& value) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (trim(value).empty()) return out;
  for (const std::string& part : split(value, ',')) {
    const auto x = part.find('x');
    if (x == std::string::npos) {
      throw std::runtime_error("size pair '" + part + "' must look like 1000x1000");
    }
    out.emplace_back(parse_number<std::size_t>(trim(part.substr(0, x)), "user count"),
                     parse_number<std::size_t>(trim(part.substr(x + 1)), "item count"));
  }
  return out;
}

SplitMode parse_split_mode(const std::string& value) {
  if (value == "random") return SplitMode::kRandomLeaveOneOut;
  if (value == "latest") return SplitMode::kLatestLeaveOneOut;
  throw std::runtime_error("split_mode must be 'random' or 'latest', got '" + value + "'");
}

eval::ModelMode parse_model_mode(const std::string& value) {
  if (value == "ldp") return eval::ModelMode::kLdp;
  if (value == "nonprivate") return eval::ModelMode::kNonPrivate;
  if (value == "random") return eval::ModelMode::kRandom;
  throw std::runtime_error("mode must be 'ldp', 'nonprivate' or 'random', got '" + value + "'");
}

std::string split_mode_to_string(SplitMode mode) {
  return mode == SplitMode::kRandomLeaveOneOut ? "random" : "latest";
}

std::string model_mode_to_string(eval::ModelMode mode) {
  switch (mode) {
    case eval::ModelMode::kLdp:
      return "ldp";
    case eval::ModelMode::kNonPrivate:
      return "nonprivate";
    case eval::ModelMode::kRandom:
      return "random";
  }
  throw std::logic_error("unreachable");
}

// One entry per config key: how to set it from a string and how to render
// it. The table order is the canonical serialization order.
struct KeyHandler {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeyHandler>& key_handlers() {
  static const std::vector<KeyHandler> handlers = {
      {"data_path", [](ExperimentConfig& c, const std::string& v) { c.data_path = v; },
       [](const ExperimentConfig& c) { return c.data_path; }},
      {"min_interactions",
       [](ExperimentConfig& c, const std::string& v) {
         c.min_interactions = parse_number<std::size_t>(v, "min_interactions");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.min_interactions); }},
      {"n_users",
       [](ExperimentConfig& c, const std::string& v) {
         c.n_users = parse_optional_size(v, "n_users");
       },
       [](const ExperimentConfig& c) { return optional_size_to_string(c.n_users); }},
      {"n_items",
       [](ExperimentConfig& c, const std::string& v) {
         c.n_items = parse_optional_size(v, "n_items");
       },
       [](const ExperimentConfig& c) { return optional_size_to_string(c.n_items); }},
      {"n_factors",
       [](ExperimentConfig& c, const std::string& v) {
         c.hp.n_factors = parse_number<std::size_t>(v, "n_factors");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.hp.n_factors); }},
      {"reg",
       [](ExperimentConfig& c, const std::string& v) {
         c.hp.reg = parse_number<double>(v, "reg");
       },
       [](const ExperimentConfig& c) { return to_string_shortest(c.hp.reg); }},
      {"learning_rate",
       [](ExperimentConfig& c, const std::string& v) {
         c.hp.learning_rate = parse_number<double>(v, "learning_rate");
       },
       [](const ExperimentConfig& c) { return to_string_shortest(c.hp.learning_rate); }},
      {"confidence_alpha",
       [](ExperimentConfig& c, const std::string& v) {
         c.hp.confidence_alpha = parse_number<double>(v, "confidence_alpha");
       },
       [](const ExperimentConfig& c) { return to_string_shortest(c.hp.confidence_alpha); }},
      {"epochs",
       [](ExperimentConfig& c, const std::string& v) {
         c.hp.epochs = parse_number<std::size_t>(v, "epochs");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.hp.epochs); }},
      {"inner_steps",
       [](ExperimentConfig& c, const std::string& v) {
         c.hp.inner_steps = parse_number<std::size_t>(v, "inner_steps");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.hp.inner_steps); }},
      {"epsilon",
       [](ExperimentConfig& c, const std::string& v) {
         c.hp.epsilon = parse_number<double>(v, "epsilon");
       },
       [](const ExperimentConfig& c) { return to_string_shortest(c.hp.epsilon); }},
      {"reports_per_user",
       [](ExperimentConfig& c, const std::string& v) {
         c.hp.reports_per_user = parse_number<std::size_t>(v, "reports_per_user");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.hp.reports_per_user); }},
      {"split_mode",
       [](ExperimentConfig& c, const std::string& v) { c.split_mode = parse_split_mode(v); },
       [](const ExperimentConfig& c) { return split_mode_to_string(c.split_mode); }},
      {"n_splits",
       [](ExperimentConfig& c, const std::string& v) {
         c.n_splits = parse_number<std::size_t>(v, "n_splits");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.n_splits); }},
      {"cutoffs",
       [](ExperimentConfig& c, const std::string& v) {
         c.cutoffs = parse_list<int>(v, [](const std::string& p) {
           return parse_number<int>(p, "cutoff");
         });
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.cutoffs.size(); ++i) {
           if (i) s += ',';
           s += std::to_string(c.cutoffs[i]);
         }
         return s;
       }},
      {"seed",
       [](ExperimentConfig& c, const std::string& v) {
         c.seed = parse_number<std::uint64_t>(v, "seed");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      {"output_path",
       [](ExperimentConfig& c, const std::string& v) { c.output_path = v; },
       [](const ExperimentConfig& c) { return c.output_path; }},
      {"checkpoint_path",
       [](ExperimentConfig& c, const std::string& v) { c.checkpoint_path = v; },
       [](const ExperimentConfig& c) { return c.checkpoint_path; }},
      {"mode",
       [](ExperimentConfig& c, const std::string& v) { c.mode = parse_model_mode(v); },
       [](const ExperimentConfig& c) { return model_mode_to_string(c.mode); }},
      {"eval_every",
       [](ExperimentConfig& c, const std::string& v) {
         c.eval_every = parse_number<std::size_t>(v, "eval_every");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.eval_every); }},
      {"sweep_epsilons",
       [](ExperimentConfig& c, const std::string& v) {
         c.sweep_epsilons = parse_list<double>(v, [](const std::string& p) {
           return parse_number<double>(p, "sweep epsilon");
         });
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.sweep_epsilons.size(); ++i) {
           if (i) s += ',';
           s += to_string_shortest(c.sweep_epsilons[i]);
         }
         return s;
       }},
      {"sweep_reports",
       [](ExperimentConfig& c, const std::string& v) {
         c.sweep_reports = parse_list<std::size_t>(v, [](const std::string& p) {
           return parse_number<std::size_t>(p, "sweep report count");
         });
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.sweep_reports.size(); ++i) {
           if (i) s += ',';
           s += std::to_string(c.sweep_reports[i]);
         }
         return s;
       }},
      {"sweep_sizes",
       [](ExperimentConfig& c, const std::string& v) { c.sweep_sizes = parse_size_pairs(v); },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.sweep_sizes.size(); ++i) {
           if (i) s += ',';
           s += std::to_string(c.sweep_sizes[i].first) + "x" +
                std::to_string(c.sweep_sizes[i].second);
         }
         return s;
       }},
  };
  return handlers;
}

const KeyHandler* find_handler(const std::string& key) {
  for (const auto& h : key_handlers()) {
    if (key == h.key) return &h;
  }
  return nullptr;
}

// Writes the per-epoch trace rows. Schema:
//   epoch,hr_at_<K>...,loss,upload_bytes,download_bytes
void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<server::EpochRecord>& trace,
                     const std::vector<int>& cutoffs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open metrics file '" + path.string() + "' for writing");
  }
  out << "epoch";
  for (int k : cutoffs) out << ",hr_at_" << k;
  out << ",loss,upload_bytes,download_bytes\n";
  for (const auto& rec : trace) {
    out << rec.epoch;
    for (int k : cutoffs) {
      const auto it = rec.metrics.hr.find(k);
      out << ',' << (it == rec.metrics.hr.end() ? "nan" : fixed6(it->second));
    }
    out << ',' << to_string_shortest(rec.loss) << ',' << rec.upload_bytes_per_user << ','
        << rec.download_bytes_per_user << '\n';
  }
  if (!out) {
    throw std::runtime_error("failed to write metrics file '" + path.string() + "'");
  }
}

std::filesystem::path trace_path_for(const std::string& output_path, std::size_t split,
                                     std::size_t n_splits) {
  if (n_splits == 1) return output_path;
  return output_path + ".split" + std::to_string(split);
}

InteractionDataset load_base_dataset(const ExperimentConfig& config) {
  if (config.data_path.empty()) {
    throw std::runtime_error("config needs data_path");
  }
  const std::vector<RawRating> ratings =
      parse_ratings_file(resolve_data_path(config).string());
  InteractionDataset ds = binarize(ratings);
  return filter_min_interactions(ds, config.min_interactions);
}

bool all_users_splittable(const InteractionDataset& ds) {
  for (std::uint32_t u = 0; u < ds.n_users(); ++u) {
    if (ds.items_of(u).size() < 2) return false;
  }
  return true;
}

// Removes users that cannot survive a leave-one-out split while keeping the
// item index space intact.
InteractionDataset drop_light_users(const InteractionDataset& ds, std::size_t min_degree) {
  std::vector<std::int64_t> kept_user_ids;
  std::vector<IndexedInteraction> interactions;
  for (std::uint32_t u = 0; u < ds.n_users(); ++u) {
    const auto items = ds.items_of(u);
    if (items.size() < min_degree) continue;
    const auto new_u = static_cast<std::uint32_t>(kept_user_ids.size());
    kept_user_ids.push_back(ds.user_id(u));
    const auto stamps = ds.timestamps_of(u);
    for (std::size_t j = 0; j < items.size(); ++j) {
      interactions.push_back({new_u, items[j], stamps[j]});
    }
  }
  if (kept_user_ids.empty()) {
    throw std::runtime_error("no users left with enough interactions to split");
  }
  return InteractionDataset::from_indexed(std::move(kept_user_ids), ds.item_ids(),
                                          std::move(interactions));
}

InteractionDataset prepare_dataset(const InteractionDataset& base,
                                   std::optional<std::size_t> n_users,
                                   std::optional<std::size_t> n_items,
                                   std::uint64_t subset_seed, std::ostream& out) {
  InteractionDataset ds = base;
  if (n_users || n_items) {
    ds = sample_subset(ds, n_users.value_or(ds.n_users()), n_items.value_or(ds.n_items()),
                       subset_seed);
  }
  if (!all_users_splittable(ds)) {
    const std::size_t before = ds.n_users();
    ds = drop_light_users(ds, 2);
    out << "note: dropped " << before - ds.n_users()
        << " users with a single interaction (leave-one-out needs two)\n";
  }
  return ds;
}

void print_privacy(const ExperimentConfig& config, std::ostream& out) {
  switch (config.mode) {
    case eval::ModelMode::kLdp: {
      const double budget =
          static_cast<double>(config.hp.reports_per_user) * config.hp.epsilon;
      out << "privacy: epsilon_per_report=" << to_string_shortest(config.hp.epsilon)
          << " reports_per_user=" << config.hp.reports_per_user
          << " user_budget_per_epoch_eps=" << to_string_shortest(budget)
          << " epochs=" << config.hp.epochs << '\n';
      break;
    }
    case eval::ModelMode::kNonPrivate:
      out << "privacy: none (non-private baseline)\n";
      break;
    case eval::ModelMode::kRandom:
      out << "privacy: not applicable (random scorer)\n";
      break;
  }
}

std::string metrics_kv(const eval::Metrics& metrics) {
  std::string s;
  for (const auto& [k, v] : metrics.hr) {
    s += " hr_at_" + std::to_string(k) + "=" + fixed6(v);
  }
  return s;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "'");
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

void ExperimentConfig::validate() const {
  hp.validate();
  if (n_splits == 0) {
    throw std::invalid_argument("n_splits must be positive");
  }
  if (eval_every == 0) {
    throw std::invalid_argument("eval_every must be positive");
  }
  if (min_interactions == 0) {
    throw std::invalid_argument("min_interactions must be positive");
  }
  if (cutoffs.empty()) {
    throw std::invalid_argument("need at least one ranking cutoff");
  }
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    if (cutoffs[i] <= 0 || (i > 0 && cutoffs[i] <= cutoffs[i - 1])) {
      throw std::invalid_argument("cutoffs must be positive and strictly ascending");
    }
  }
  if (output_path.empty()) {
    throw std::invalid_argument("output_path must not be empty");
  }
  for (double e : sweep_epsilons) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw std::invalid_argument("sweep epsilons must be finite and positive");
    }
  }
  for (std::size_t k : sweep_reports) {
    if (k == 0) {
      throw std::invalid_argument("sweep report counts must be positive");
    }
  }
  for (const auto& [nu, ni] : sweep_sizes) {
    if (nu == 0 || ni == 0) {
      throw std::invalid_argument("sweep sizes must be positive");
    }
  }
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
    }
    if (!seen.insert(key).second) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": duplicate key '" +
                               key + "'");
    }
    const KeyHandler* handler = find_handler(key);
    if (handler == nullptr) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" +
                               key + "'");
    }
    try {
      handler->set(config, value);
    } catch (const std::exception& e) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file '" + path.string() + "'");
  }
  try {
    return parse_config(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void apply_override(ExperimentConfig& config, const std::string& key,
                    const std::string& value) {
  const KeyHandler* handler = find_handler(key);
  if (handler == nullptr) {
    throw std::runtime_error("unknown config key '" + key + "'");
  }
  handler->set(config, value);
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& h : key_handlers()) {
    out += h.key;
    const std::string value = h.get(config);
    out += " =";
    if (!value.empty()) {
      out += ' ';
      out += value;
    }
    out += '\n';
  }
  return out;
}

std::filesystem::path resolve_data_path(const ExperimentConfig& config) {
  std::filesystem::path path = config.data_path;
  const char* dir = std::getenv(kDataDirEnvVar);
  if (dir != nullptr && dir[0] != '\0' && path.is_relative()) {
    return std::filesystem::path(dir) / path;
  }
  return path;
}

void run_experiment(const ExperimentConfig& config, std::ostream& out) {
  config.validate();
  const InteractionDataset base = load_base_dataset(config);
  const InteractionDataset ds =
      prepare_dataset(base, config.n_users, config.n_items, config.seed, out);
  out << ds.summary();
  out << "mode=" << model_mode_to_string(config.mode) << '\n';
  print_privacy(config, out);

  std::vector<eval::Metrics> finals;
  for (std::size_t s = 0; s < config.n_splits; ++s) {
    const SplitPair split = split_leave_one_out(
        ds, config.split_mode, derive_seed(config.seed, {stream::kSplit, s}));
    const std::vector<eval::RankingTask> tasks = eval::build_ranking_tasks(
        ds, split, derive_seed(config.seed, {stream::kNegatives, s}));
    const std::uint64_t run_seed = derive_seed(config.seed, {stream::kRun, s});
    const std::filesystem::path trace_path =
        trace_path_for(config.output_path, s, config.n_splits);

    eval::Metrics final_metrics;
    if (config.mode == eval::ModelMode::kRandom) {
      final_metrics = eval::random_model_hit_ratio(
          tasks, config.cutoffs, derive_seed(config.seed, {stream::kRandomModel, s}));
      server::EpochRecord rec;
      rec.epoch = 0;
      rec.evaluated = true;
      rec.metrics = final_metrics;
      write_trace_csv(trace_path, {rec}, config.cutoffs);
    } else {
      server::TrainHooks hooks;
      hooks.evaluate = [&](const std::vector<mf::UserEmbedding>& X,
                           const mf::ItemMatrix& V) {
        return eval::hit_ratio(tasks, X, V, config.cutoffs);
      };
      hooks.eval_every = config.eval_every;
      hooks.compute_loss = true;
      try {
        const server::TrainingResult result =
            config.mode == eval::ModelMode::kLdp
                ? server::run_training(split.train, config.hp, run_seed, hooks)
                : server::run_training_nonprivate(split.train, config.hp, run_seed, hooks);
        write_trace_csv(trace_path, result.trace, config.cutoffs);
        if (!result.trace.empty() && result.trace.back().evaluated) {
          final_metrics = result.trace.back().metrics;
        } else {
          final_metrics = eval::hit_ratio(tasks, result.user_embeddings,
                                          result.item_matrix, config.cutoffs);
        }
        if (s == 0 && !config.checkpoint_path.empty()) {
          server::save_item_matrix(config.checkpoint_path, result.item_matrix);
        }
      } catch (const server::DivergenceError& e) {
        write_trace_csv(trace_path, e.partial_trace, config.cutoffs);
        throw;
      }
    }
    out << "split=" << s << metrics_kv(final_metrics) << '\n';
    finals.push_back(std::move(final_metrics));
  }

  const eval::CrossValStats stats = eval::summarize_metrics(finals);
  out << "summary: mode=" << model_mode_to_string(config.mode)
      << " epsilon=" << to_string_shortest(config.hp.epsilon)
      << " k=" << config.hp.reports_per_user << " splits=" << config.n_splits;
  for (const auto& [k, mean] : stats.mean.hr) {
    out << " hr_at_" << k << "=" << fixed6(mean) << "+/-" << fixed6(stats.stddev.hr.at(k));
  }
  out << '\n';
}

int run_sweep(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  config.validate();
  const InteractionDataset base = load_base_dataset(config);

  const std::vector<double> eps_axis =
      config.sweep_epsilons.empty() ? std::vector<double>{config.hp.epsilon}
                                    : config.sweep_epsilons;
  const std::vector<std::size_t> k_axis =
      config.sweep_reports.empty() ? std::vector<std::size_t>{config.hp.reports_per_user}
                                   : config.sweep_reports;
  std::vector<std::pair<std::optional<std::size_t>, std::optional<std::size_t>>> size_axis;
  if (config.sweep_sizes.empty()) {
    size_axis.emplace_back(config.n_users, config.n_items);
  } else {
    for (const auto& [nu, ni] : config.sweep_sizes) {
      size_axis.emplace_back(nu, ni);
    }
  }

  std::string header = "epsilon,k,n_users,n_items";
  for (int k : config.cutoffs) header += ",hr_at_" + std::to_string(k);

  std::set<std::string> done;
  const std::filesystem::path csv_path = config.output_path;
  if (std::filesystem::exists(csv_path)) {
    const std::vector<std::string> lines = read_lines(csv_path);
    if (lines.empty() || lines.front() != header) {
      throw std::runtime_error("existing sweep file '" + csv_path.string() +
                               "' has a different schema");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const std::vector<std::string> fields = split(lines[i], ',');
      if (fields.size() < 4) {
        throw std::runtime_error("existing sweep file '" + csv_path.string() +
                                 "' has a malformed row: " + lines[i]);
      }
      done.insert(fields[0] + ',' + fields[1] + ',' + fields[2] + ',' + fields[3]);
    }
  } else {
    std::ofstream fresh(csv_path, std::ios::trunc);
    if (!fresh) {
      throw std::runtime_error("cannot open sweep file '" + csv_path.string() +
                               "' for writing");
    }
    fresh << header << '\n';
  }

  int failures = 0;
  for (const auto& [nu_req, ni_req] : size_axis) {
    // Grid keys use the requested size; "full" resolves to the filtered
    // dataset's dimensions so the key stays deterministic.
    const std::size_t nu_key = nu_req.value_or(base.n_users());
    const std::size_t ni_key = ni_req.value_or(base.n_items());

    std::optional<InteractionDataset> prepared;
    for (double eps : eps_axis) {
      for (std::size_t k : k_axis) {
        const std::string key = to_string_shortest(eps) + ',' + std::to_string(k) + ',' +
                                std::to_string(nu_key) + ',' + std::to_string(ni_key);
        if (done.contains(key)) {
          out << "skip " << key << " (already in " << csv_path.string() << ")\n";
          continue;
        }
        try {
          if (!prepared) {
            std::ostringstream sink;
            prepared = prepare_dataset(base, nu_req, ni_req,
                                       derive_seed(config.seed, {nu_key, ni_key}), sink);
          }
          mf::HyperParams hp = config.hp;
          hp.epsilon = eps;
          hp.reports_per_user = k;
          const std::uint64_t point_seed =
              derive_seed(config.seed, {stream::kSweepPoint, std::bit_cast<std::uint64_t>(eps),
                                        k, nu_key, ni_key});
          const eval::CrossValStats stats =
              eval::cross_validate(*prepared, hp, config.split_mode, config.n_splits,
                                   config.cutoffs, point_seed, config.mode);
          std::string row = key;
          for (int cutoff : config.cutoffs) {
            row += ',' + fixed6(stats.mean.hr.at(cutoff));
          }
          std::ofstream csv(csv_path, std::ios::app);
          csv << row << '\n';
          csv.flush();
          if (!csv) {
            throw std::runtime_error("failed to append to sweep file '" + csv_path.string() +
                                     "'");
          }
          out << "done " << row << '\n';
        } catch (const std::exception& e) {
          err << "sweep point " << key << " failed: " << e.what() << '\n';
          ++failures;
        }
      }
    }
  }
  return failures;
}

void report_costs(const ExperimentConfig& config, std::ostream& out) {
  config.hp.validate();
  std::size_t n_items = 0;
  if (config.n_items) {
    n_items = *config.n_items;
  } else if (!config.data_path.empty()) {
    n_items = load_base_dataset(config).n_items();
  } else {
    throw std::runtime_error("report_costs needs n_items or data_path");
  }
  const server::CommCost cost = server::comm_cost(config.hp, n_items);
  out << "n_items=" << n_items << '\n'
      << "n_factors=" << config.hp.n_factors << '\n'
      << "epochs=" << config.hp.epochs << '\n'
      << "reports_per_user=" << config.hp.reports_per_user << '\n'
      << "download_bytes_per_epoch=" << cost.download_bytes_per_epoch << '\n'
      << "download_bytes_total=" << cost.download_bytes_total << '\n'
      << "upload_bytes_per_epoch=" << cost.upload_bytes_per_epoch << '\n'
      << "upload_bytes_total=" << cost.upload_bytes_total << '\n'
      << "upload_wire_bytes_per_epoch=" << cost.upload_wire_bytes_per_epoch << '\n'
      << "upload_wire_bytes_total=" << cost.upload_wire_bytes_total << '\n';
}

void summarize_csv(const std::vector<std::string>& paths, std::ostream& out) {
  if (paths.empty()) {
    throw std::invalid_argument("summarize needs at least one CSV path");
  }
  const std::set<std::string> key_names = {"epoch", "epsilon", "k", "n_users", "n_items"};

  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  for (const std::string& path : paths) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) {
      throw std::runtime_error("'" + path + "' is empty");
    }
    const std::vector<std::string> this_header = split(lines.front(), ',');
    if (header.empty()) {
      header = this_header;
    } else if (header != this_header) {
      throw std::runtime_error("'" + path + "' has a different schema than the first file");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      std::vector<std::string> fields = split(lines[i], ',');
      if (fields.size() != header.size()) {
        throw std::runtime_error("'" + path + "' row " + std::to_string(i + 1) +
                                 " has " + std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(header.size()));
      }
      rows.push_back(std::move(fields));
    }
  }

  std::vector<std::size_t> key_cols;
  std::vector<std::size_t> metric_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (key_names.contains(header[c])) {
      key_cols.push_back(c);
    } else {
      metric_cols.push_back(c);
    }
  }

  // Group rows by key tuple; keys sort numerically so epochs line up.
  const auto key_of = [&](const std::vector<std::string>& row) {
    std::vector<std::string> key;
    for (std::size_t c : key_cols) key.push_back(row[c]);
    return key;
  };
  const auto numeric_less = [](const std::vector<std::string>& a,
                               const std::vector<std::string>& b) {
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
      double da = 0.0, db = 0.0;
      const auto ra = std::from_chars(a[i].data(), a[i].data() + a[i].size(), da);
      const auto rb = std::from_chars(b[i].data(), b[i].data() + b[i].size(), db);
      const bool na = ra.ec == std::errc() && ra.ptr == a[i].data() + a[i].size();
      const bool nb = rb.ec == std::errc() && rb.ptr == b[i].data() + b[i].size();
      if (na && nb) {
        if (da != db) return da < db;
      } else if (a[i] != b[i]) {
        return a[i] < b[i];
      }
    }
    return a.size() < b.size();
  };

  std::map<std::vector<std::string>, std::vector<std::vector<double>>, decltype(numeric_less)>
      groups(numeric_less);
  for (const auto& row : rows) {
    std::vector<double> values;
    values.reserve(metric_cols.size());
    for (std::size_t c : metric_cols) {
      values.push_back(parse_number<double>(row[c], "metric '" + header[c] + "'"));
    }
    groups[key_of(row)].push_back(std::move(values));
  }

  for (std::size_t i = 0; i < key_cols.size(); ++i) {
    out << (i ? "," : "") << header[key_cols[i]];
  }
  out << (key_cols.empty() ? "n" : ",n");
  for (std::size_t c : metric_cols) {
    out << ',' << header[c] << "_mean," << header[c] << "_std";
  }
  out << '\n';
  for (const auto& [key, samples] : groups) {
    for (std::size_t i = 0; i < key.size(); ++i) {
      out << (i ? "," : "") << key[i];
    }
    const auto n = static_cast<double>(samples.size());
    out << (key.empty() ? "" : ",") << samples.size();
    for (std::size_t m = 0; m < metric_cols.size(); ++m) {
      double sum = 0.0;
      for (const auto& s : samples) sum += s[m];
      const double mean = sum / n;
      double sq = 0.0;
      for (const auto& s : samples) sq += (s[m] - mean) * (s[m] - mean);
      const double stddev = samples.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
      out << ',' << to_string_shortest(mean) << ',' << to_string_shortest(stddev);
    }
    out << '\n';
  }
}

}  // namespace fmfldp::experiment
