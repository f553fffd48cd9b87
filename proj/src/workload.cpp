// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#include "rollsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rollsim/errors.hpp"
#include "rollsim/rng.hpp"

namespace rollsim {

using nlohmann::json;

const Prompt* WorkloadTrace::find_prompt(const std::string& id) const {
  auto it = std::lower_bound(
      prompts.begin(), prompts.end(), id,
      [](const Prompt& p, const std::string& key) { return p.id < key; });
  if (it == prompts.end() || it->id != id) return nullptr;
  return &*it;
}

const Prompt& WorkloadTrace::prompt_or_throw(const std::string& id) const {
  const Prompt* p = find_prompt(id);
  if (!p) throw ValidationError("unknown prompt id '" + id + "'");
  return *p;
}

void WorkloadTrace::validate() const {
  if (responses_per_prompt < 1)
    throw ValidationError("responses_per_prompt must be >= 1");
  if (limits.max_prompt_len < 1 || limits.max_response_len < 1)
    throw ValidationError("trace limits must be positive");
  for (size_t i = 0; i < prompts.size(); ++i) {
    const Prompt& p = prompts[i];
    if (p.id.empty()) throw ValidationError("prompt with empty id");
    if (i > 0 && !(prompts[i - 1].id < p.id))
      throw ValidationError("prompts not sorted by unique id near '" + p.id +
                            "'");
    if (p.prompt_len() < 1)
      throw ValidationError("prompt '" + p.id + "' has no tokens");
    if (p.prompt_len() > limits.max_prompt_len)
      throw ValidationError("prompt '" + p.id + "' longer than max_prompt_len");
    if (p.ground_truth_len < 1 ||
        p.ground_truth_len > limits.max_response_len)
      throw ValidationError("prompt '" + p.id +
                            "' ground_truth_len out of range");
  }
  int prev_step = -1;
  for (const StepRecord& s : steps) {
    if (s.step_idx <= prev_step)
      throw ValidationError("step indices must be strictly increasing at step " +
                            std::to_string(s.step_idx));
    prev_step = s.step_idx;
    if (s.scheduled_prompts.empty())
      throw ValidationError("step " + std::to_string(s.step_idx) +
                            " schedules no prompts");
    std::set<std::string> seen;
    for (const std::string& id : s.scheduled_prompts) {
      if (!find_prompt(id))
        throw ValidationError("step " + std::to_string(s.step_idx) +
                              " schedules unknown prompt '" + id + "'");
      if (!seen.insert(id).second)
        throw ValidationError("step " + std::to_string(s.step_idx) +
                              " schedules prompt '" + id + "' twice");
    }
    if (s.actual_lengths.size() != s.scheduled_prompts.size())
      throw ValidationError("step " + std::to_string(s.step_idx) +
                            " lengths do not cover the scheduled batch");
    for (const auto& [id, lens] : s.actual_lengths) {
      if (!seen.count(id))
        throw ValidationError("step " + std::to_string(s.step_idx) +
                              " has lengths for unscheduled prompt '" + id +
                              "'");
      if (static_cast<int>(lens.size()) != responses_per_prompt)
        throw ValidationError("step " + std::to_string(s.step_idx) +
                              " prompt '" + id + "' needs exactly " +
                              std::to_string(responses_per_prompt) +
                              " response lengths");
      for (int l : lens) {
        if (l < 1 || l > limits.max_response_len)
          throw ValidationError("step " + std::to_string(s.step_idx) +
                                " prompt '" + id +
                                "' response length out of range: " +
                                std::to_string(l));
      }
    }
  }
}

TraceFormat trace_format_from_string(const std::string& s) {
  if (s == "csv") return TraceFormat::csv;
  if (s == "jsonl") return TraceFormat::jsonl;
  throw ConfigError("unknown trace format '" + s + "' (expected csv or jsonl)");
}

TraceFormat guess_trace_format(const std::string& path) {
  if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl")
    return TraceFormat::jsonl;
  return TraceFormat::csv;
}

namespace {

constexpr const char* kCsvHeader = "step_idx,prompt_id,response_idx,actual_len";

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long parse_long(const std::string& s, const std::string& origin, int line) {
  try {
    size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(origin + ":" + std::to_string(line) +
                     ": expected integer, got '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string csv_to_string(const WorkloadTrace& t) {
  std::ostringstream os;
  os << "# rollsim-trace v1\n";
  os << "# g " << t.responses_per_prompt << "\n";
  os << "# max_prompt_len " << t.limits.max_prompt_len << "\n";
  os << "# max_response_len " << t.limits.max_response_len << "\n";
  for (const Prompt& p : t.prompts) {
    os << "# prompt " << p.id << " " << p.ground_truth_len;
    for (int32_t tok : p.token_ids) os << " " << tok;
    os << "\n";
  }
  os << kCsvHeader << "\n";
  for (const StepRecord& s : t.steps) {
    for (const std::string& id : s.scheduled_prompts) {
      const auto& lens = s.actual_lengths.at(id);
      for (size_t r = 0; r < lens.size(); ++r) {
        os << s.step_idx << "," << id << "," << r << "," << lens[r] << "\n";
      }
    }
  }
  return os.str();
}

WorkloadTrace csv_from_string(const std::string& text,
                              const std::string& origin) {
  WorkloadTrace t;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  // step_idx -> record, assembled in file order
  StepRecord* cur = nullptr;
  while (std::getline(is, line)) {
    ++lineno;
    std::string l = trim(line);
    if (l.empty()) continue;
    if (l[0] == '#') {
      if (header_seen)
        throw ParseError(origin + ":" + std::to_string(lineno) +
                         ": metadata after the column header");
      std::istringstream ms(l.substr(1));
      std::string key;
      ms >> key;
      if (key == "prompt") {
        Prompt p;
        long gt;
        if (!(ms >> p.id >> gt))
          throw ParseError(origin + ":" + std::to_string(lineno) +
                           ": malformed prompt metadata");
        p.ground_truth_len = static_cast<int>(gt);
        long tok;
        while (ms >> tok) p.token_ids.push_back(static_cast<int32_t>(tok));
        t.prompts.push_back(std::move(p));
      } else if (key == "g") {
        long v;
        if (!(ms >> v))
          throw ParseError(origin + ":" + std::to_string(lineno) +
                           ": malformed g metadata");
        t.responses_per_prompt = static_cast<int>(v);
      } else if (key == "max_prompt_len") {
        long v;
        ms >> v;
        t.limits.max_prompt_len = static_cast<int>(v);
      } else if (key == "max_response_len") {
        long v;
        ms >> v;
        t.limits.max_response_len = static_cast<int>(v);
      }
      // Unknown comment lines are ignored.
      continue;
    }
    if (!header_seen) {
      std::string compact;
      for (char c : l)
        if (c != ' ') compact += c;
      if (compact != kCsvHeader)
        throw ParseError(origin + ":" + std::to_string(lineno) +
                         ": expected column header '" + kCsvHeader + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f = split(l, ',');
    if (f.size() != 4)
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": expected 4 fields, got " +
                       std::to_string(f.size()));
    int step = static_cast<int>(parse_long(trim(f[0]), origin, lineno));
    std::string id = trim(f[1]);
    int ridx = static_cast<int>(parse_long(trim(f[2]), origin, lineno));
    int len = static_cast<int>(parse_long(trim(f[3]), origin, lineno));
    if (cur == nullptr || cur->step_idx != step) {
      if (cur != nullptr && step < cur->step_idx)
        throw ParseError(origin + ":" + std::to_string(lineno) +
                         ": step indices must not decrease");
      t.steps.emplace_back();
      cur = &t.steps.back();
      cur->step_idx = step;
    }
    auto it = cur->actual_lengths.find(id);
    if (it == cur->actual_lengths.end()) {
      cur->scheduled_prompts.push_back(id);
      it = cur->actual_lengths.emplace(id, std::vector<int>()).first;
    }
    if (ridx != static_cast<int>(it->second.size()))
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": response_idx out of order for prompt '" + id +
                       "' (expected " + std::to_string(it->second.size()) +
                       ", got " + std::to_string(ridx) + ")");
    it->second.push_back(len);
  }
  if (!header_seen)
    throw ParseError(origin + ": missing column header '" +
                     std::string(kCsvHeader) + "'");
  std::sort(t.prompts.begin(), t.prompts.end(),
            [](const Prompt& a, const Prompt& b) { return a.id < b.id; });
  t.validate();
  return t;
}

std::string jsonl_to_string(const WorkloadTrace& t) {
  std::ostringstream os;
  json header;
  header["type"] = "header";
  header["g"] = t.responses_per_prompt;
  header["max_prompt_len"] = t.limits.max_prompt_len;
  header["max_response_len"] = t.limits.max_response_len;
  json plist = json::array();
  for (const Prompt& p : t.prompts) {
    json jp;
    jp["id"] = p.id;
    jp["ground_truth_len"] = p.ground_truth_len;
    jp["token_ids"] = p.token_ids;
    plist.push_back(std::move(jp));
  }
  header["prompts"] = std::move(plist);
  os << header.dump() << "\n";
  for (const StepRecord& s : t.steps) {
    json js;
    js["step"] = s.step_idx;
    js["scheduled"] = s.scheduled_prompts;
    json lens = json::object();
    for (const auto& [id, v] : s.actual_lengths) lens[id] = v;
    js["lengths"] = std::move(lens);
    os << js.dump() << "\n";
  }
  return os.str();
}

WorkloadTrace jsonl_from_string(const std::string& text,
                                const std::string& origin) {
  WorkloadTrace t;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    std::string l = trim(line);
    if (l.empty()) continue;
    json j;
    try {
      j = json::parse(l);
    } catch (const json::parse_error& e) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": " +
                       e.what());
    }
    try {
      if (!header_seen) {
        if (!j.contains("type") || j["type"] != "header")
          throw ParseError(origin + ":" + std::to_string(lineno) +
                           ": first line must be the header object");
        t.responses_per_prompt = j.at("g").get<int>();
        if (j.contains("max_prompt_len"))
          t.limits.max_prompt_len = j["max_prompt_len"].get<int>();
        if (j.contains("max_response_len"))
          t.limits.max_response_len = j["max_response_len"].get<int>();
        for (const json& jp : j.at("prompts")) {
          Prompt p;
          p.id = jp.at("id").get<std::string>();
          p.ground_truth_len = jp.at("ground_truth_len").get<int>();
          p.token_ids = jp.at("token_ids").get<std::vector<int32_t>>();
          t.prompts.push_back(std::move(p));
        }
        header_seen = true;
        continue;
      }
      StepRecord s;
      s.step_idx = j.at("step").get<int>();
      if (j.contains("scheduled"))
        s.scheduled_prompts = j["scheduled"].get<std::vector<std::string>>();
      for (const auto& [id, v] : j.at("lengths").items()) {
        s.actual_lengths[id] = v.get<std::vector<int>>();
        if (!j.contains("scheduled")) s.scheduled_prompts.push_back(id);
      }
      t.steps.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": " +
                       e.what());
    }
  }
  if (!header_seen) throw ParseError(origin + ": missing header line");
  std::sort(t.prompts.begin(), t.prompts.end(),
            [](const Prompt& a, const Prompt& b) { return a.id < b.id; });
  t.validate();
  return t;
}

}  // namespace

WorkloadTrace trace_from_string(const std::string& text, TraceFormat format,
                                const std::string& origin) {
  return format == TraceFormat::csv ? csv_from_string(text, origin)
                                    : jsonl_from_string(text, origin);
}

std::string trace_to_string(const WorkloadTrace& trace, TraceFormat format) {
  return format == TraceFormat::csv ? csv_to_string(trace)
                                    : jsonl_to_string(trace);
}

WorkloadTrace load_trace(const std::string& path, TraceFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trace file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return trace_from_string(ss.str(), format, path);
}

void save_trace(const WorkloadTrace& trace, const std::string& path,
                TraceFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write trace file '" + path + "'");
  out << trace_to_string(trace, format);
}

void SynthConfig::validate() const {
  if (prompt_count < 1) throw ConfigError("prompt_count must be >= 1");
  if (step_count < 1) throw ConfigError("step_count must be >= 1");
  if (responses_per_prompt < 1)
    throw ConfigError("responses_per_prompt must be >= 1");
  if (limits.max_prompt_len < 1 || limits.max_response_len < 1)
    throw ConfigError("trace limits must be positive");
  if (prompt_len_min < 1 || prompt_len_min > limits.max_prompt_len)
    throw ConfigError("prompt_len_min out of range");
  if (prompt_len_mean < prompt_len_min)
    throw ConfigError("prompt_len_mean below prompt_len_min");
  if (prompt_len_sigma < 0) throw ConfigError("prompt_len_sigma must be >= 0");
  if (drift_scale < 0) throw ConfigError("drift_scale must be >= 0");
  if (paper_calibration && drift_scale > 1.0)
    throw ConfigError(
        "paper_calibration bounds per-epoch drift; drift_scale must be <= 1");
  if (increase_fraction < 0 || increase_fraction > 1)
    throw ConfigError("increase_fraction must be in [0, 1]");
  if (trend_slope < 0 || noise_bound < 0)
    throw ConfigError("trend_slope and noise_bound must be >= 0");
  if (!paper_calibration &&
      trend_slope * drift_scale > limits.max_response_len)
    throw ConfigError("trend_slope inconsistent with max_response_len");
  if (response_jitter < 0) throw ConfigError("response_jitter must be >= 0");
  if (ground_truth_error < 0)
    throw ConfigError("ground_truth_error must be >= 0");
  if (base_len_median < 1 || base_len_median > limits.max_response_len)
    throw ConfigError("base_len_median out of range");
  if (base_len_log_sigma < 0)
    throw ConfigError("base_len_log_sigma must be >= 0");
  if (prefix_sharing.fraction < 0 || prefix_sharing.fraction > 1)
    throw ConfigError("prefix_sharing.fraction must be in [0, 1]");
  if (prefix_sharing.prefix_len < 0 ||
      prefix_sharing.prefix_len > limits.max_prompt_len)
    throw ConfigError("prefix_sharing.prefix_len out of range");
  if (prefix_sharing.group_count < 1)
    throw ConfigError("prefix_sharing.group_count must be >= 1");
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
}

namespace {

struct DriftBucket {
  double slope_max;
  double noise_bound;
};

// Sized so that with jitter and rounding included, stable prompts move at
// most 50 tokens per step and moderate ones at most 100.
constexpr DriftBucket kStable{8.0, 12.0};
constexpr DriftBucket kModerate{20.0, 25.0};
constexpr DriftBucket kVolatile{45.0, 60.0};

double clampd(double v, double lo, double hi) {
  return std::min(hi, std::max(lo, v));
}

}  // namespace

WorkloadTrace generate_synthetic(const SynthConfig& cfg, uint64_t seed) {
  cfg.validate();
  WorkloadTrace t;
  t.responses_per_prompt = cfg.responses_per_prompt;
  t.limits = cfg.limits;

  Rng rng(hash_combine(seed, 0x726f6c6cULL));
  const int P = cfg.prompt_count;
  const int T = cfg.step_count;
  const int G = cfg.responses_per_prompt;
  const double maxr = cfg.limits.max_response_len;

  int id_width = 4;
  while (P - 1 >= static_cast<int>(std::pow(10, id_width))) ++id_width;

  // Shared prefixes, one pattern per group.
  int sharer_count =
      static_cast<int>(std::llround(cfg.prefix_sharing.fraction * P));
  std::vector<std::vector<int32_t>> patterns;
  for (int g = 0; g < cfg.prefix_sharing.group_count; ++g) {
    Rng prng(hash_combine(seed, hash_combine(0x70726566ULL, g)));
    std::vector<int32_t> pat(cfg.prefix_sharing.prefix_len);
    for (int32_t& tok : pat)
      tok = static_cast<int32_t>(prng.uniform_int(0, cfg.vocab_size - 1));
    patterns.push_back(std::move(pat));
  }

  struct PromptState {
    double base, slope, noise_bound;
  };
  std::vector<PromptState> st(P);
  int stable_cut = (P * 7 + 9) / 10;        // ceil(0.7 P)
  int moderate_cut = stable_cut + (P * 2 + 9) / 10;

  for (int p = 0; p < P; ++p) {
    Prompt pr;
    std::ostringstream idos;
    idos << "p";
    std::string num = std::to_string(p);
    idos << std::string(id_width - num.size(), '0') << num;
    pr.id = idos.str();

    int plen = static_cast<int>(std::llround(
        rng.normal(cfg.prompt_len_mean, cfg.prompt_len_sigma)));
    plen = std::max(cfg.prompt_len_min,
                    std::min(cfg.limits.max_prompt_len, plen));
    pr.token_ids.resize(plen);
    bool sharer = p < sharer_count && cfg.prefix_sharing.prefix_len > 0;
    const std::vector<int32_t>* pat =
        sharer ? &patterns[p % cfg.prefix_sharing.group_count] : nullptr;
    for (int i = 0; i < plen; ++i) {
      int32_t tok = static_cast<int32_t>(rng.uniform_int(0, cfg.vocab_size - 1));
      if (pat && i < static_cast<int>(pat->size())) tok = (*pat)[i];
      pr.token_ids[i] = tok;
    }

    DriftBucket bucket =
        cfg.paper_calibration
            ? (p < stable_cut ? kStable
                              : (p < moderate_cut ? kModerate : kVolatile))
            : DriftBucket{cfg.trend_slope, cfg.noise_bound};
    double sign = rng.uniform() < cfg.increase_fraction ? 1.0 : -1.0;
    double mag = rng.uniform(0.3, 1.0) * bucket.slope_max;
    st[p].slope = sign * mag * cfg.drift_scale;
    st[p].noise_bound = bucket.noise_bound * cfg.drift_scale;
    st[p].base = clampd(cfg.base_len_median *
                            std::exp(rng.normal(0.0, cfg.base_len_log_sigma)),
                        1.0, maxr);
    t.prompts.push_back(std::move(pr));
  }

  double jit = cfg.response_jitter * cfg.drift_scale;
  std::vector<std::vector<std::vector<int>>> lens(
      T, std::vector<std::vector<int>>(P));
  for (int step = 0; step < T; ++step) {
    for (int p = 0; p < P; ++p) {
      double noise = st[p].noise_bound > 0
                         ? rng.uniform(-st[p].noise_bound, st[p].noise_bound)
                         : 0.0;
      double mean = clampd(st[p].base + st[p].slope * step + noise, 1.0, maxr);
      lens[step][p].resize(G);
      for (int r = 0; r < G; ++r) {
        double j = jit > 0 ? rng.uniform(-jit, jit) : 0.0;
        lens[step][p][r] = static_cast<int>(
            std::llround(clampd(mean + j, 1.0, maxr)));
        lens[step][p][r] = std::max(1, lens[step][p][r]);
      }
    }
  }

  for (int p = 0; p < P; ++p) {
    double mean0 = 0;
    for (int r = 0; r < G; ++r) mean0 += lens[0][p][r];
    mean0 /= G;
    double err = cfg.ground_truth_error > 0
                     ? rng.uniform(-cfg.ground_truth_error,
                                   cfg.ground_truth_error)
                     : 0.0;
    t.prompts[p].ground_truth_len = static_cast<int>(
        std::llround(clampd(mean0 * (1.0 + err), 1.0, maxr)));
    t.prompts[p].ground_truth_len = std::max(1, t.prompts[p].ground_truth_len);
  }

  for (int step = 0; step < T; ++step) {
    StepRecord s;
    s.step_idx = step;
    for (int p = 0; p < P; ++p) {
      s.scheduled_prompts.push_back(t.prompts[p].id);
      s.actual_lengths[t.prompts[p].id] = lens[step][p];
    }
    t.steps.push_back(std::move(s));
  }

  std::sort(t.prompts.begin(), t.prompts.end(),
            [](const Prompt& a, const Prompt& b) { return a.id < b.id; });
  t.validate();
  return t;
}

}  // namespace rollsim
