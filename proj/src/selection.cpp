#include <cmath>

#include "pragsim/error.hpp"
#include "pragsim/estimators.hpp"

namespace pragsim {

bool is_lmm(Engine engine) {
  return engine == Engine::LmmExchangeable || engine == Engine::LmmCar1 || engine == Engine::LmmExponential;
}

void validate(const ModelSpec& s) {
  const std::string who = "method " + (s.key.empty() ? std::string("<unnamed>") : s.key);
  const bool single = s.selection != Selection::All;
  if (single && s.engine != Engine::OlsSandwich) throw Error(who + ": single-score selections require the ols_sandwich engine");
  if (!single && s.engine == Engine::OlsSandwich) throw Error(who + ": selection all requires the wgee or an lmm engine");
  const bool summary = s.selection == Selection::Mean || s.selection == Selection::Best;
  if (summary) {
    if (s.time_adjust != TimeAdjust::None) throw Error(who + ": mean/best scores carry no timing; time_adjust must be none");
    if (s.effect_model != EffectModel::Constant) throw Error(who + ": mean/best scores support only a constant effect");
    if (s.selection == Selection::Best && s.mean_options.weight_by_n)
      throw Error(who + ": weight_by_n applies to the mean score only");
  } else if (s.mean_options.weight_by_n || s.mean_options.adjust_for_n) {
    throw Error(who + ": mean options apply to mean/best scores only");
  }
  if (!std::isfinite(s.target_time)) throw Error(who + ": target_time must be finite");
}

bool needs_basis(const ModelSpec& spec) {
  return spec.time_adjust == TimeAdjust::Splines3 || spec.effect_model == EffectModel::TimeVarying;
}

std::vector<AnalysisRow> select_scores(const TrialDataset& dataset, const ModelSpec& spec, Rng& rng) {
  std::vector<AnalysisRow> out;
  const auto& rows = dataset.rows;
  out.reserve(spec.selection == Selection::All ? rows.size() : static_cast<std::size_t>(dataset.n_participants));

  std::size_t begin = 0;
  while (begin < rows.size()) {
    std::size_t end = begin + 1;
    while (end < rows.size() && rows[end].person_id == rows[begin].person_id) ++end;
    const int n = static_cast<int>(end - begin);
    const auto& first = rows[begin];

    auto make = [&](const ObservationRow& r) {
      AnalysisRow a;
      a.person_id = r.person_id;
      a.site = r.site;
      a.arm = r.arm;
      a.baseline = r.baseline;
      a.t = r.t;
      a.y = r.y;
      a.n_i = n;
      return a;
    };

    switch (spec.selection) {
      case Selection::All: {
        const double w = spec.engine == Engine::Wgee ? 1.0 / n : 1.0;
        for (std::size_t k = begin; k < end; ++k) {
          auto a = make(rows[k]);
          a.weight = w;
          out.push_back(a);
        }
        break;
      }
      case Selection::Random: {
        std::uniform_int_distribution<int> pick(0, n - 1);
        out.push_back(make(rows[begin + static_cast<std::size_t>(pick(rng))]));
        break;
      }
      case Selection::ClosestTo12: {
        // Rows are sorted by time, so a strict comparison keeps the earlier row on ties.
        std::size_t best = begin;
        for (std::size_t k = begin + 1; k < end; ++k)
          if (std::abs(rows[k].t - spec.target_time) < std::abs(rows[best].t - spec.target_time)) best = k;
        out.push_back(make(rows[best]));
        break;
      }
      case Selection::Mean: {
        double sum = 0.0;
        for (std::size_t k = begin; k < end; ++k) sum += rows[k].y;
        auto a = make(first);
        a.t.reset();
        a.y = sum / n;
        a.weight = spec.mean_options.weight_by_n ? n : 1.0;
        out.push_back(a);
        break;
      }
      case Selection::Best: {
        std::size_t best = begin;
        for (std::size_t k = begin + 1; k < end; ++k)
          if (rows[k].y < rows[best].y) best = k;
        auto a = make(rows[best]);
        a.t.reset();
        out.push_back(a);
        break;
      }
    }
    begin = end;
  }
  return out;
}

}  // namespace pragsim
