#include "pragsim/emit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <tuple>

#include "pragsim/config.hpp"
#include "pragsim/error.hpp"

namespace pragsim {

namespace {

std::string fixed(std::optional<double> v, int digits = 6) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  std::string s = buf;
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) s.erase(0, s[0] == '-' ? 1 : 0);
  return s;
}

// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::vector<const ScenarioSummary*> sorted(const std::vector<ScenarioSummary>& summaries) {
  std::vector<const ScenarioSummary*> v;
  for (const auto& s : summaries) v.push_back(&s);
  std::stable_sort(v.begin(), v.end(), [](const ScenarioSummary* a, const ScenarioSummary* b) {
    return std::tie(a->scenario_id, a->method_key) < std::tie(b->scenario_id, b->method_key);
  });
  return v;
}

}  // namespace

void write_csv(const std::vector<ScenarioSummary>& summaries, std::ostream& out) {
  out << "scenario_id,method,selection,time_adjust,effect_model,engine,estimand_kind,truth,n_reps,n_converged,"
         "mean_estimate,bias,empirical_se,median_model_se,coverage,rejection_rate,mc_se_rejection\n";
  for (const ScenarioSummary* s : sorted(summaries)) {
    const ModelSpec& m = s->method;
    out << csv_field(s->scenario_id) << ',' << csv_field(s->method_key) << ',' << to_string(m.selection) << ','
        << to_string(m.time_adjust) << ',' << to_string(m.effect_model) << ',' << to_string(m.engine) << ','
        << to_string(s->estimand.kind) << ',' << fixed(s->estimand.value) << ',' << s->n_reps << ','
        << s->n_converged << ',' << fixed(s->mean_estimate) << ',' << fixed(s->bias) << ','
        << fixed(s->empirical_se) << ',' << fixed(s->median_model_se) << ',' << fixed(s->coverage) << ','
        << fixed(s->rejection_rate) << ',' << fixed(s->mc_se_rejection) << '\n';
  }
}

void write_text(const std::vector<ScenarioSummary>& summaries, std::ostream& out) {
  const auto rows = sorted(summaries);
  std::size_t width = 6;
  for (const auto* s : rows) width = std::max(width, s->method_key.size());
  auto cell = [](const std::string& s, std::size_t w) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%*s", static_cast<int>(w), s.c_str());
    return std::string(buf);
  };

  std::string current;
  bool first = true;
  for (const auto* s : rows) {
    if (first || s->scenario_id != current) {
      if (!first) out << '\n';
      first = false;
      current = s->scenario_id;
      out << "Scenario: " << current << '\n';
      char head[256];
      std::snprintf(head, sizeof head, "%-*s %-14s %9s %9s %9s %9s %9s %9s %9s %11s\n", static_cast<int>(width),
                    "method", "estimand", "truth", "estimate", "bias", "emp_se", "model_se", "coverage", "reject",
                    "converged");
      out << head << std::string(width + 100, '-') << '\n';
    }
    char name[128];
    std::snprintf(name, sizeof name, "%-*s", static_cast<int>(width), s->method_key.c_str());
    const std::string absent = "**";
    auto opt = [&](std::optional<double> v) { return v ? fixed(v, 3) : absent; };
    char kind[32];
    std::snprintf(kind, sizeof kind, "%-14s", std::string(to_string(s->estimand.kind)).c_str());
    out << name << ' ' << kind << ' ' << cell(opt(s->estimand.value), 9) << ' ' << cell(opt(s->mean_estimate), 9)
        << ' ' << cell(opt(s->bias), 9) << ' ' << cell(opt(s->empirical_se), 9) << ' '
        << cell(opt(s->median_model_se), 9) << ' ' << cell(opt(s->coverage), 9) << ' '
        << cell(opt(s->rejection_rate), 9) << ' '
        << cell(std::to_string(s->n_converged) + "/" + std::to_string(s->n_reps), 11) << '\n';
    if (!s->error.empty()) out << "  note: " << s->error << '\n';
  }
}

void emit_summaries(const std::vector<ScenarioSummary>& summaries, EmitFormat format,
                    const std::filesystem::path& path) {
  auto write = [&](std::ostream& os) {
    if (format == EmitFormat::Csv)
      write_csv(summaries, os);
    else
      write_text(summaries, os);
  };
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write(out);
  out.flush();
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace pragsim
