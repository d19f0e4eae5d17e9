#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsalpha/backfill/store.hpp"
#include "newsalpha/extract/extractor.hpp"
#include "newsalpha/promptopt/gates.hpp"

namespace newsalpha {

enum class CandidateStatus { proposed, evaluated, frozen, rejected };

inline const char* to_string(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::proposed: return "proposed";
    case CandidateStatus::evaluated: return "evaluated";
    case CandidateStatus::frozen: return "frozen";
    case CandidateStatus::rejected: return "rejected";
  }
  return "?";
}

struct PromptCandidate {
  PromptTemplate tmpl;
  std::string hypothesis;
  std::optional<SignalMetrics> metrics;
  std::optional<GateResult> gate_result;
  int round = 0;
  CandidateStatus status = CandidateStatus::proposed;
  std::string reason;  // why a candidate was rejected

  bool passed() const { return gate_result && gate_result->overall_pass; }
};

inline nlohmann::ordered_json to_json(const PromptCandidate& c) {
  nlohmann::ordered_json j;
  j["round"] = c.round;
  j["id"] = c.tmpl.id;
  j["lineage"] = c.tmpl.lineage ? nlohmann::ordered_json(*c.tmpl.lineage) : nlohmann::ordered_json();
  j["template_hash"] = hex64(c.tmpl.hash);
  j["hypothesis"] = c.hypothesis;
  j["status"] = to_string(c.status);
  if (!c.reason.empty()) j["reason"] = c.reason;
  j["metrics"] = c.metrics ? to_json(*c.metrics) : nlohmann::ordered_json();
  j["gates"] = c.gate_result ? to_json(*c.gate_result) : nlohmann::ordered_json();
  return j;
}

// ---------------------------------------------------------------------------
// Proposers

struct Proposal {
  std::string id;
  std::string body;
  std::string hypothesis;
};

// What a proposer sees about the current candidate.
inline nlohmann::ordered_json feedback_json(const PromptCandidate& current) {
  nlohmann::ordered_json j;
  j["id"] = current.tmpl.id;
  j["round"] = current.round;
  j["prompt"] = current.tmpl.body;
  j["metrics"] = current.metrics ? to_json(*current.metrics) : nlohmann::ordered_json();
  j["gates"] = current.gate_result ? to_json(*current.gate_result) : nlohmann::ordered_json();
  return j;
}

class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual Proposal next(const PromptCandidate& current, const nlohmann::ordered_json& feedback) = 0;
};

// Hands out a fixed ordered list of templates, then throws ProposerExhausted.
class ScriptedProposer final : public Proposer {
 public:
  explicit ScriptedProposer(std::vector<Proposal> script) : script_(std::move(script)) {}

  static ScriptedProposer from_templates(const std::vector<PromptTemplate>& templates) {
    std::vector<Proposal> script;
    for (const auto& t : templates) script.push_back({t.id, t.body, "scripted mutation " + t.id});
    return ScriptedProposer(std::move(script));
  }

  Proposal next(const PromptCandidate&, const nlohmann::ordered_json&) override {
    if (pos_ >= script_.size()) throw ProposerExhausted("scripted list consumed");
    return script_[pos_++];
  }

  std::size_t remaining() const { return script_.size() - pos_; }

 private:
  std::vector<Proposal> script_;
  std::size_t pos_ = 0;
};

struct HttpProposerConfig {
  std::string endpoint;
  std::string model;
  std::string api_key_env;
  int timeout_seconds = 300;
};

// Remote meta-optimizer. Sends the current prompt and its metrics; expects
// either a JSON object {"prompt": ..., "hypothesis": ...} or the new prompt
// text itself.
class HttpProposer final : public Proposer {
 public:
  static constexpr const char* kInstructions =
      "You refine a feature-extraction prompt for daily stock news bundles. The JSON below "
      "holds the current prompt, its signal metrics and the adequacy gates it must clear. "
      "Propose ONE discrete structural mutation. Keep the {{.Ticker}} and {{.Date}} "
      "placeholders exactly once each. Reply with a JSON object "
      "{\"hypothesis\": \"...\", \"prompt\": \"...\"}.";

  explicit HttpProposer(HttpProposerConfig cfg) : cfg_(std::move(cfg)) {}

  Proposal next(const PromptCandidate& current, const nlohmann::ordered_json& feedback) override {
    const http::Url url = http::split_url(cfg_.endpoint);
    httplib::Client client(url.origin);
    client.set_read_timeout(cfg_.timeout_seconds);
    httplib::Headers headers;
    if (const std::string key = http::env_secret(cfg_.api_key_env); !key.empty()) {
      headers.emplace("Authorization", "Bearer " + key);
    }
    nlohmann::ordered_json req;
    req["model"] = cfg_.model;
    req["messages"] = nlohmann::ordered_json::array(
        {{{"role", "system"}, {"content", kInstructions}},
         {{"role", "user"}, {"content", feedback.dump(2)}}});
    auto res = client.Post(url.path, headers, req.dump(), "application/json");
    http::check_response(res, "POST " + cfg_.endpoint);
    ++calls_;
    return parse_reply(HttpExtractor::reply_text(res->body), current, calls_);
  }

  static Proposal parse_reply(const std::string& text, const PromptCandidate& current, int n) {
    Proposal p{current.tmpl.id + "-m" + std::to_string(n), text, ""};
    const auto open = text.find('{');
    if (open != std::string::npos) {
      try {
        const auto j = nlohmann::json::parse(text.substr(open, text.rfind('}') - open + 1));
        if (j.is_object() && j.contains("prompt") && j["prompt"].is_string()) {
          p.body = j["prompt"].get<std::string>();
          p.hypothesis = j.value("hypothesis", "");
        }
      } catch (const nlohmann::json::exception&) {
      }
    }
    return p;
  }

 private:
  HttpProposerConfig cfg_;
  int calls_ = 0;
};

// Asks the proposer for a mutation of an evaluated candidate. The result
// carries lineage = current id. A body that is not a valid template yields a
// candidate already marked rejected.
inline PromptCandidate propose(Proposer& proposer, const PromptCandidate& current) {
  if (current.status == CandidateStatus::proposed || !current.metrics) {
    throw PreconditionError("propose: current candidate has not been evaluated");
  }
  Proposal p = proposer.next(current, feedback_json(current));
  PromptCandidate c;
  c.hypothesis = std::move(p.hypothesis);
  c.round = current.round + 1;
  try {
    c.tmpl = PromptTemplate::make(p.id, p.body, current.tmpl.id);
  } catch (const TemplateError& e) {
    c.tmpl = PromptTemplate{p.id, p.body, current.tmpl.id, fnv1a(p.body)};
    c.status = CandidateStatus::rejected;
    c.reason = e.what();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Loop

enum class SelectionRule { max_composite, max_ic_ir };

inline SelectionRule parse_selection_rule(const std::string& s) {
  if (s == "max_composite") return SelectionRule::max_composite;
  if (s == "max_ic_ir") return SelectionRule::max_ic_ir;
  throw ConfigError("unknown selection rule '" + s + "'");
}

inline const char* to_string(SelectionRule r) {
  return r == SelectionRule::max_composite ? "max_composite" : "max_ic_ir";
}

// Everything one optimisation run needs. Handles are non-owning.
struct LoopConfig {
  LoopConfig(DayRange optimization, DayRange oos, std::vector<std::string> universe_)
      : optimization_window(optimization), oos_window(oos), universe(std::move(universe_)) {
    if (optimization.last < optimization.first || oos.last < oos.first) {
      throw ConfigError("loop windows must have first <= last");
    }
    if (!(optimization.last < oos.first)) {
      throw ConfigError("out-of-sample window must start strictly after the optimization window");
    }
    if (universe.empty()) throw ConfigError("empty universe");
  }

  DayRange optimization_window;
  DayRange oos_window;
  std::vector<std::string> universe;
  int max_rounds = 5;
  int horizon_days = 5;
  GateThresholds thresholds;
  CompositeWeights weights;
  SelectionRule selection = SelectionRule::max_composite;
  PanelOptions panel_options;

  const EventStore* store = nullptr;
  FeatureExtractor* extractor = nullptr;
  Proposer* proposer = nullptr;
  const MarketData* market = nullptr;
  MacroSource macro_source;

  void check_handles() const {
    if (!store || !extractor || !market) {
      throw PreconditionError("loop config lacks store, extractor or market");
    }
    if (!macro_source) throw PreconditionError("loop config lacks a macro source");
  }
};

// Ledger of every evaluated or rejected candidate, in evaluation order. When
// a path is set each row is appended to a JSON-lines file as it is recorded.
class CandidateLedger {
 public:
  CandidateLedger() = default;
  explicit CandidateLedger(std::filesystem::path file) : file_(std::move(file)) {
    if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
    std::ofstream(*file_, std::ios::trunc);
  }

  void append(const PromptCandidate& c) {
    rows_.push_back(c);
    if (!file_) return;
    std::ofstream out(*file_, std::ios::app | std::ios::binary);
    if (!out) throw StorageError("cannot append to " + file_->string());
    out << to_json(c).dump() << '\n';
  }

  const std::vector<PromptCandidate>& rows() const { return rows_; }

 private:
  std::optional<std::filesystem::path> file_;
  std::vector<PromptCandidate> rows_;
};

inline std::string ledger_jsonl(const std::vector<PromptCandidate>& rows) {
  std::string out;
  for (const auto& c : rows) out += to_json(c).dump() + "\n";
  return out;
}

namespace detail {

inline PanelResult extract_window(const PromptCandidate& c, const LoopConfig& cfg,
                                  const DayRange& window) {
  cfg.check_handles();
  return extract_panel(*cfg.extractor, c.tmpl, cfg.store->query_bundles(cfg.universe, window),
                       cfg.macro_source, cfg.panel_options);
}

}  // namespace detail

// Extracts over the optimization window, scores at the configured horizon and
// applies the gates. On a fatal extraction error the candidate is marked
// rejected (and recorded) before the error propagates.
inline PromptCandidate evaluate_candidate(PromptCandidate c, const LoopConfig& cfg,
                                          CandidateLedger* ledger = nullptr) {
  if (c.status != CandidateStatus::proposed) {
    throw PreconditionError("evaluate_candidate: candidate is " + std::string(to_string(c.status)));
  }
  try {
    const PanelResult r = detail::extract_window(c, cfg, cfg.optimization_window);
    c.metrics = compute_signal_metrics(r.panel, *cfg.market, cfg.horizon_days, "sentiment",
                                       cfg.weights);
  } catch (const PanelError& e) {
    c.status = CandidateStatus::rejected;
    c.reason = e.what();
    if (ledger) ledger->append(c);
    throw;
  }
  c.gate_result = evaluate_gates(*c.metrics, cfg.thresholds);
  c.status = CandidateStatus::evaluated;
  if (ledger) ledger->append(c);
  return c;
}

struct OptimizeResult {
  PromptCandidate frozen;  // or the best rejected candidate when no_pass
  std::vector<PromptCandidate> ledger;
  bool no_pass = false;
};

namespace detail {

inline double selection_score(const PromptCandidate& c, SelectionRule rule) {
  return rule == SelectionRule::max_composite ? c.metrics->composite : c.metrics->ic_ir();
}

// True when a should be preferred over b: higher score, then earlier round,
// then smaller template hash.
inline bool better(const PromptCandidate& a, const PromptCandidate& b, SelectionRule rule) {
  const double sa = selection_score(a, rule), sb = selection_score(b, rule);
  if (sa != sb) return sa > sb;
  if (a.round != b.round) return a.round < b.round;
  return a.tmpl.hash < b.tmpl.hash;
}

}  // namespace detail

// Evaluates the baseline, then up to max_rounds proposals. Freezes the best
// gate-passing candidate; if none passes, returns the best candidate by the
// same rule marked rejected, with no_pass set.
inline OptimizeResult optimize(const PromptTemplate& baseline, LoopConfig& cfg,
                               CandidateLedger* ledger_sink = nullptr) {
  cfg.check_handles();
  CandidateLedger local;
  CandidateLedger& ledger = ledger_sink ? *ledger_sink : local;
  const std::size_t first_row = ledger.rows().size();

  PromptCandidate current;
  current.tmpl = baseline;
  current.hypothesis = "baseline";
  std::vector<std::uint64_t> seen = {baseline.hash};
  std::optional<PromptCandidate> last_evaluated;
  try {
    last_evaluated = evaluate_candidate(current, cfg, &ledger);
  } catch (const PanelError&) {
  }

  for (int round = 1; round <= cfg.max_rounds && cfg.proposer; ++round) {
    PromptCandidate feedback_from = last_evaluated.value_or(current);
    if (!feedback_from.metrics) {
      // Baseline failed outright: give the proposer neutral feedback.
      feedback_from.metrics = SignalMetrics{};
      feedback_from.status = CandidateStatus::rejected;
    }
    PromptCandidate next;
    try {
      next = propose(*cfg.proposer, feedback_from);
    } catch (const ProposerExhausted&) {
      break;
    }
    next.round = round;
    if (next.status == CandidateStatus::rejected) {
      ledger.append(next);
      continue;
    }
    if (std::find(seen.begin(), seen.end(), next.tmpl.hash) != seen.end()) {
      next.status = CandidateStatus::rejected;
      next.reason = "duplicate of an earlier candidate";
      ledger.append(next);
      continue;
    }
    seen.push_back(next.tmpl.hash);
    try {
      last_evaluated = evaluate_candidate(next, cfg, &ledger);
    } catch (const PanelError&) {
    }
  }

  OptimizeResult result;
  result.ledger.assign(ledger.rows().begin() + std::ptrdiff_t(first_row), ledger.rows().end());
  std::optional<std::size_t> best_pass, best_any;
  for (std::size_t i = 0; i < result.ledger.size(); ++i) {
    const auto& c = result.ledger[i];
    if (!c.metrics || c.status != CandidateStatus::evaluated) continue;
    if (!best_any || detail::better(c, result.ledger[*best_any], cfg.selection)) best_any = i;
    if (c.passed() && (!best_pass || detail::better(c, result.ledger[*best_pass], cfg.selection))) {
      best_pass = i;
    }
  }
  if (best_pass) {
    result.ledger[*best_pass].status = CandidateStatus::frozen;
    result.frozen = result.ledger[*best_pass];
  } else {
    result.no_pass = true;
    if (best_any) {
      result.ledger[*best_any].status = CandidateStatus::rejected;
      result.ledger[*best_any].reason = "best candidate but failed gates";
      result.frozen = result.ledger[*best_any];
    } else {
      result.frozen.tmpl = baseline;
      result.frozen.status = CandidateStatus::rejected;
      result.frozen.reason = "no candidate could be evaluated";
    }
  }
  return result;
}

struct OosValidation {
  SignalMetrics metrics;
  GateResult gate_result;
  std::vector<std::string> regressions;  // gates that passed in-sample but fail here
};

// Re-scores a frozen candidate on the out-of-sample window. Reporting only:
// the candidate's status is never touched.
inline OosValidation validate_oos(const PromptCandidate& frozen, const LoopConfig& cfg) {
  if (frozen.status != CandidateStatus::frozen) {
    throw PreconditionError("validate_oos: candidate is not frozen");
  }
  const PanelResult r = detail::extract_window(frozen, cfg, cfg.oos_window);
  OosValidation v;
  v.metrics = compute_signal_metrics(r.panel, *cfg.market, cfg.horizon_days, "sentiment", cfg.weights);
  v.gate_result = evaluate_gates(v.metrics, cfg.thresholds);
  if (frozen.gate_result) {
    for (std::size_t i = 0; i < v.gate_result.gates.size(); ++i) {
      if (frozen.gate_result->gates[i].pass && !v.gate_result.gates[i].pass) {
        v.regressions.push_back(v.gate_result.gates[i].name);
      }
    }
  }
  return v;
}

// Approximate standard error of an IC information ratio estimated from n
// daily ICs: sqrt(overlap * (1 + ir^2 / 2) / n). Daily ICs against h-day
// forward returns share h - 1 days of return, so `overlap` = h inflates the
// variance to account for their autocorrelation.
inline double ic_ir_standard_error(double ic_ir, std::size_t n_days, int overlap = 1) {
  return std::sqrt(double(overlap) * (1.0 + 0.5 * ic_ir * ic_ir) / double(n_days));
}

// Whether two IC-IR estimates differ by at most `k` combined standard errors.
inline bool ic_ir_consistent(const ICReport& a, const ICReport& b, int horizon_days = 1,
                             double k = 2.0) {
  const double se = std::hypot(ic_ir_standard_error(a.ic_ir, a.n_days, horizon_days),
                               ic_ir_standard_error(b.ic_ir, b.n_days, horizon_days));
  return std::abs(a.ic_ir - b.ic_ir) <= k * se;
}

inline nlohmann::ordered_json to_json(const OosValidation& v) {
  nlohmann::ordered_json j;
  j["metrics"] = to_json(v.metrics);
  j["gates"] = to_json(v.gate_result);
  j["regressions"] = v.regressions;
  return j;
}

}  // namespace newsalpha
