// comply/trace.hpp - Line-oriented run traces and the summary fold over them
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace comply
{

/// Declaration order is the within-tick output order.
enum class Stage {
  perceive,
  context,
  ground,
  goals,
  candidates,
  select,
  conflict,
  mitigate,
  query,
  act,
  violation_open,
  violation_close,
  env_event,
  parked
};

inline const char * to_string(Stage s)
{
  switch (s) {
    case Stage::perceive: return "PERCEIVE";
    case Stage::context: return "CONTEXT";
    case Stage::ground: return "GROUND";
    case Stage::goals: return "GOALS";
    case Stage::candidates: return "CANDIDATES";
    case Stage::select: return "SELECT";
    case Stage::conflict: return "CONFLICT";
    case Stage::mitigate: return "MITIGATE";
    case Stage::query: return "QUERY";
    case Stage::act: return "ACT";
    case Stage::violation_open: return "VIOLATION_OPEN";
    case Stage::violation_close: return "VIOLATION_CLOSE";
    case Stage::env_event: return "ENV_EVENT";
    case Stage::parked: return "PARKED";
  }
  return "?";
}

inline std::optional<Stage> parse_stage(const std::string & s)
{
  for (int i = 0; i <= static_cast<int>(Stage::parked); ++i) {
    if (s == to_string(static_cast<Stage>(i))) return static_cast<Stage>(i);
  }
  return std::nullopt;
}

struct TraceEvent
{
  std::int64_t tick = 0;
  Stage stage = Stage::perceive;
  std::vector<std::pair<std::string, std::string>> fields;

  const std::string * get(const std::string & key) const
  {
    for (const auto & [k, v] : fields) {
      if (k == key) return &v;
    }
    return nullptr;
  }

  std::string value(const std::string & key, const std::string & fallback = "") const
  {
    const std::string * v = get(key);
    return v ? *v : fallback;
  }

  friend bool operator==(const TraceEvent &, const TraceEvent &) = default;
};

/// Values holding blanks, quotes or '=' are double-quoted with backslash escapes.
inline std::string quote_value(const std::string & v)
{
  const bool plain = !v.empty() && v.find_first_of(" \t\"=\\\n") == std::string::npos;
  if (plain) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

inline std::string format_event(const TraceEvent & e)
{
  std::string out = "tick=" + std::to_string(e.tick) + " stage=" + to_string(e.stage);
  for (const auto & [k, v] : e.fields) out += " " + k + "=" + quote_value(v);
  return out;
}

/// Inverse of format_event; nullopt on malformed lines.
inline std::optional<TraceEvent> parse_event(const std::string & line)
{
  std::vector<std::pair<std::string, std::string>> kv;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    if (i >= line.size()) break;
    const std::size_t eq = line.find('=', i);
    if (eq == std::string::npos) return std::nullopt;
    std::string key = line.substr(i, eq - i);
    i = eq + 1;
    std::string val;
    if (i < line.size() && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        const char c = line[i++];
        if (c == '\\' && i < line.size()) {
          const char n = line[i++];
          val += n == 'n' ? '\n' : n;
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          val += c;
        }
      }
      if (!closed) return std::nullopt;
    } else {
      const std::size_t end = line.find(' ', i);
      val = line.substr(i, end == std::string::npos ? std::string::npos : end - i);
      i = end == std::string::npos ? line.size() : end;
    }
    kv.emplace_back(std::move(key), std::move(val));
  }
  if (kv.size() < 2 || kv[0].first != "tick" || kv[1].first != "stage") return std::nullopt;
  TraceEvent e;
  try {
    e.tick = std::stoll(kv[0].second);
  } catch (const std::exception &) {
    return std::nullopt;
  }
  auto st = parse_stage(kv[1].second);
  if (!st) return std::nullopt;
  e.stage = *st;
  e.fields.assign(kv.begin() + 2, kv.end());
  return e;
}

/// Collects events in emission order; `ordered` sorts by (tick, stage), keeping
/// emission order within a stage.
class Trace
{
public:
  void emit(std::int64_t tick, Stage stage, std::vector<std::pair<std::string, std::string>> fields)
  {
    events_.push_back(TraceEvent{tick, stage, std::move(fields)});
  }

  std::vector<TraceEvent> ordered() const
  {
    std::vector<TraceEvent> out = events_;
    std::stable_sort(out.begin(), out.end(), [](const TraceEvent & a, const TraceEvent & b) {
      if (a.tick != b.tick) return a.tick < b.tick;
      return static_cast<int>(a.stage) < static_cast<int>(b.stage);
    });
    return out;
  }

private:
  std::vector<TraceEvent> events_;
};

inline std::string format_trace(const std::vector<TraceEvent> & events)
{
  std::string out;
  for (const auto & e : events) out += format_event(e) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

struct RunSummary
{
  std::string scenario;
  std::string seed = "0";
  std::string outcome = "timeout";
  std::int64_t ticks = 0;
  std::int64_t decisions = 0;
  std::int64_t measurements = 0;
  std::int64_t conflicts = 0;
  std::int64_t queries = 0;
  std::int64_t violations_opened = 0;
  std::int64_t violations_closed = 0;
  std::int64_t fallbacks = 0;
  std::int64_t coasts = 0;
  std::map<std::string, std::int64_t> violation_ticks;
  std::map<std::string, std::int64_t> strategies;

  friend bool operator==(const RunSummary &, const RunSummary &) = default;
};

/// Pure fold. The closing `ENV_EVENT event=end` carries outcome and tick count; open
/// violation records run to that count.
inline RunSummary summarize(const std::vector<TraceEvent> & trace)
{
  RunSummary s;
  std::map<std::string, std::int64_t> open;
  for (const auto & e : trace) {
    switch (e.stage) {
      case Stage::act:
        ++s.decisions;
        if (e.value("measurement") == "yes") ++s.measurements;
        if (e.value("coast") == "yes") ++s.coasts;
        break;
      case Stage::conflict: ++s.conflicts; break;
      case Stage::query: ++s.queries; break;
      case Stage::mitigate:
        ++s.strategies[e.value("strategy")];
        if (e.value("fallback") == "yes") ++s.fallbacks;
        break;
      case Stage::violation_open: {
        ++s.violations_opened;
        const std::string id = e.value("constraint");
        open[id] = e.tick;
        s.violation_ticks.try_emplace(id, 0);
        break;
      }
      case Stage::violation_close: {
        ++s.violations_closed;
        const std::string id = e.value("constraint");
        auto it = open.find(id);
        if (it != open.end()) {
          s.violation_ticks[id] += e.tick - it->second;
          open.erase(it);
        }
        break;
      }
      case Stage::env_event:
        if (e.value("event") == "end") {
          s.outcome = e.value("outcome", "timeout");
          s.scenario = e.value("scenario");
          s.seed = e.value("seed", "0");
          try {
            s.ticks = std::stoll(e.value("ticks", "0"));
          } catch (const std::exception &) {
            s.ticks = 0;
          }
        }
        break;
      default: break;
    }
  }
  for (const auto & [id, opened] : open) s.violation_ticks[id] += std::max<std::int64_t>(0, s.ticks - opened);
  return s;
}

inline std::string format_summary(const RunSummary & s)
{
  auto joined = [](const std::map<std::string, std::int64_t> & m, const char * sep) {
    std::string out;
    for (const auto & [k, v] : m) {
      if (!out.empty()) out += sep;
      out += k + "=" + std::to_string(v);
    }
    return out.empty() ? std::string("-") : out;
  };
  std::ostringstream o;
  o << "scenario: " << s.scenario << "\n"
    << "seed: " << s.seed << "\n"
    << "outcome: " << s.outcome << "\n"
    << "ticks: " << s.ticks << "\n"
    << "decisions: " << s.decisions << "\n"
    << "measurements: " << s.measurements << "\n"
    << "conflicts: " << s.conflicts << "\n"
    << "queries: " << s.queries << "\n"
    << "violationsOpened: " << s.violations_opened << "\n"
    << "violationsClosed: " << s.violations_closed << "\n"
    << "violationTicks: " << joined(s.violation_ticks, ", ") << "\n"
    << "mitigations: " << joined(s.strategies, ", ") << "\n"
    << "fallbacks: " << s.fallbacks << "\n"
    << "coasts: " << s.coasts << "\n";
  o << "summary scenario=" << quote_value(s.scenario) << " seed=" << s.seed << " outcome=" << s.outcome
    << " ticks=" << s.ticks << " decisions=" << s.decisions << " measurements=" << s.measurements
    << " conflicts=" << s.conflicts << " queries=" << s.queries << " violationsOpened=" << s.violations_opened
    << " violationsClosed=" << s.violations_closed << " fallbacks=" << s.fallbacks << " coasts=" << s.coasts;
  for (const auto & [k, v] : s.violation_ticks) o << " violationTicks." << k << "=" << v;
  for (const auto & [k, v] : s.strategies) o << " mitigations." << k << "=" << v;
  o << "\n";
  return o.str();
}

}  // namespace comply
