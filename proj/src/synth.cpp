#include "knowflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <ostream>
#include <random>
#include <unordered_set>

namespace knowflow::synth {

using corpus::RawAuthor;
using corpus::RawRecord;
using corpus::RawReference;
using graph::PairObservation;

namespace {

// Bijective base-26 so that distinct integers stay distinct after title
// normalization drops digits.
std::string letters(std::size_t n, bool capital) {
  std::string out;
  ++n;
  while (n > 0) {
    --n;
    out.push_back(static_cast<char>((capital ? 'A' : 'a') + n % 26));
    n /= 26;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::string doi_of(std::size_t i) { return "10.5555/kf." + std::to_string(i); }
std::string title_of(std::size_t i) { return "Synthetic study " + letters(i, false); }

RawAuthor author_name(std::uint32_t j) {
  RawAuthor a;
  std::string suffix = letters(j, false);
  suffix[0] = static_cast<char>(suffix[0] - 'a' + 'A');
  a.surname = "Author " + suffix;
  a.given = std::string(1, static_cast<char>('A' + j % 26)) + ". " +
            std::string(1, static_cast<char>('A' + (j / 26) % 26)) + ".";
  return a;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double PlantedLogit::logit(const PairObservation& obs) const {
  double z = intercept;
  if (obs.distance.is_finite() && obs.distance.value() >= 1 &&
      static_cast<std::size_t>(obs.distance.value()) <= distance_effects.size()) {
    z += distance_effects[static_cast<std::size_t>(obs.distance.value() - 1)];
  }
  if (obs.same_country.value_or(false)) z += same_country;
  if (obs.same_region.value_or(false)) z += same_region;
  return z;
}

void GeneratorParams::validate() const {
  auto probability = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(std::string(name) + " must lie in [0, 1]");
  };
  if (n_papers == 0) throw Error("n_papers must be positive");
  if (n_years < 1) throw Error("n_years must be positive");
  if (!(authors_mean >= 1.0)) throw Error("authors_mean must be at least 1");
  if (authors_max < 1) throw Error("authors_max must be positive");
  if (author_pool == 0) throw Error("author_pool must be positive");
  probability(repeat_collaboration, "repeat_collaboration");
  probability(geo_probability, "geo_probability");
  if (!(citations_mean >= 0.0)) throw Error("citations_mean must be non-negative");
  if (citations_max < 0) throw Error("citations_max must be non-negative");
  if (n_papers >= 2 && citations_mean > static_cast<double>(n_papers - 1)) {
    throw Error("infeasible parameters: more citations per paper than prior papers");
  }
  if (geo_probability > 0.0 && countries.empty()) throw Error("countries must not be empty");
  if (regions_per_country < 1) throw Error("regions_per_country must be positive");
  if (planted) {
    if (planted_max_depth < 0 || planted_max_depth > graph::kMaxSupportedDepth) {
      throw Error("planted_max_depth out of range");
    }
    if (planted->distance_effects.size() > static_cast<std::size_t>(planted_max_depth)) {
      throw Error("more planted distance effects than planted_max_depth");
    }
  }
}

nlohmann::json GeneratorParams::to_json() const {
  nlohmann::json j = {{"n_papers", n_papers},
                      {"first_year", first_year},
                      {"n_years", n_years},
                      {"authors_mean", authors_mean},
                      {"authors_max", authors_max},
                      {"author_pool", author_pool},
                      {"repeat_collaboration", repeat_collaboration},
                      {"citations_mean", citations_mean},
                      {"citations_max", citations_max},
                      {"planted_max_depth", planted_max_depth},
                      {"countries", countries},
                      {"regions_per_country", regions_per_country},
                      {"geo_probability", geo_probability},
                      {"planted", nullptr}};
  if (planted) {
    j["planted"] = {{"intercept", planted->intercept},
                    {"distance_effects", planted->distance_effects},
                    {"same_country", planted->same_country},
                    {"same_region", planted->same_region}};
  }
  return j;
}

GeneratorParams GeneratorParams::from_json(const nlohmann::json& j) {
  GeneratorParams p;
  try {
    p.n_papers = j.value("n_papers", p.n_papers);
    p.first_year = j.value("first_year", p.first_year);
    p.n_years = j.value("n_years", p.n_years);
    p.authors_mean = j.value("authors_mean", p.authors_mean);
    p.authors_max = j.value("authors_max", p.authors_max);
    p.author_pool = j.value("author_pool", p.author_pool);
    p.repeat_collaboration = j.value("repeat_collaboration", p.repeat_collaboration);
    p.citations_mean = j.value("citations_mean", p.citations_mean);
    p.citations_max = j.value("citations_max", p.citations_max);
    p.planted_max_depth = j.value("planted_max_depth", p.planted_max_depth);
    p.countries = j.value("countries", p.countries);
    p.regions_per_country = j.value("regions_per_country", p.regions_per_country);
    p.geo_probability = j.value("geo_probability", p.geo_probability);
    if (auto it = j.find("planted"); it != j.end() && !it->is_null()) {
      PlantedLogit planted;
      planted.intercept = it->value("intercept", planted.intercept);
      planted.distance_effects = it->value("distance_effects", std::vector<double>{});
      planted.same_country = it->value("same_country", 0.0);
      planted.same_region = it->value("same_region", 0.0);
      p.planted = planted;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid generator params: ") + e.what());
  }
  return p;
}

nlohmann::json GeneratorStats::to_json() const {
  return {{"papers", papers},
          {"author_slots", author_slots},
          {"citations", citations},
          {"distinct_authors", distinct_authors},
          {"mean_authors", mean_authors},
          {"mean_citations", mean_citations}};
}

SynthCorpus generate(const GeneratorParams& params, std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform_index = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };

  const std::size_t n = params.n_papers;
  std::vector<std::vector<std::uint32_t>> paper_authors(n);
  std::vector<std::vector<std::uint32_t>> author_papers(params.author_pool);
  struct Home {
    std::int32_t country = -1;
    std::int32_t region = -1;
  };
  std::vector<Home> homes(params.author_pool);

  const double extra_mean = params.authors_mean - 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    int k = 1;
    if (extra_mean > 0.0) k += std::poisson_distribution<int>(extra_mean)(rng);
    k = std::min<int>({k, params.authors_max, static_cast<int>(std::min<std::size_t>(params.author_pool, 1u << 30))});

    auto& team = paper_authors[i];
    auto add = [&](std::uint32_t a) {
      if (std::find(team.begin(), team.end(), a) == team.end()) team.push_back(a);
    };
    auto random_prior_author = [&]() {
      const auto& prior = paper_authors[uniform_index(i)];
      return prior[uniform_index(prior.size())];
    };
    for (int attempt = 0; static_cast<int>(team.size()) < k && attempt < 50 * k; ++attempt) {
      if (i > 0 && unit(rng) < params.repeat_collaboration) {
        if (team.empty()) {
          add(random_prior_author());
        } else {
          const auto member = team[uniform_index(team.size())];
          const auto& history = author_papers[member];
          if (history.empty()) {
            add(random_prior_author());
          } else {
            const auto& p = paper_authors[history[uniform_index(history.size())]];
            add(p[uniform_index(p.size())]);
          }
        }
      } else {
        add(static_cast<std::uint32_t>(uniform_index(params.author_pool)));
      }
    }
    for (std::uint32_t a = 0; static_cast<int>(team.size()) < k && a < params.author_pool; ++a) add(a);
    for (auto a : team) author_papers[a].push_back(static_cast<std::uint32_t>(i));
  }

  SynthCorpus out;
  out.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = out.records[i];
    r.source_id = "synth-" + std::to_string(i);
    r.doi = doi_of(i);
    r.title = title_of(i);
    r.year = params.first_year + static_cast<int>((i * static_cast<std::size_t>(params.n_years)) / n);
    for (auto a : paper_authors[i]) {
      RawAuthor author = author_name(a);
      auto& home = homes[a];
      if (home.country < 0 && !params.countries.empty()) {
        home.country = static_cast<std::int32_t>(uniform_index(params.countries.size()));
        home.region = static_cast<std::int32_t>(uniform_index(static_cast<std::size_t>(params.regions_per_country)));
      }
      if (params.geo_probability > 0.0 && unit(rng) < params.geo_probability) {
        const auto& country = params.countries[static_cast<std::size_t>(home.country)];
        author.country = country;
        author.region = country + "-R" + letters(static_cast<std::size_t>(home.region), true);
      }
      r.authors.push_back(std::move(author));
    }
  }

  std::vector<std::vector<std::uint32_t>> cited(n);
  if (params.planted) {
    // Draw every pair's citation from the planted logit of its realized
    // contextualized distance; the later paper cites the earlier one.
    const auto base = corpus::resolve_papers(out.records);
    graph::EnumerationOptions options;
    options.max_depth = params.planted_max_depth;
    const std::uint64_t pair_seed = mix64(seed ^ 0x706c616e746564ULL);
    graph::enumerate_pairs(base, options, [&](const PairObservation& obs) {
      if (pair_uniform(pair_seed, obs.x_id, obs.y_id) < logistic(params.planted->logit(obs))) {
        cited[obs.y_id].push_back(obs.x_id);
      }
    });
  } else {
    for (std::size_t i = 1; i < n; ++i) {
      int c = params.citations_mean > 0.0 ? std::poisson_distribution<int>(params.citations_mean)(rng) : 0;
      c = std::min<int>({c, params.citations_max, static_cast<int>(i)});
      auto& list = cited[i];
      if (static_cast<std::size_t>(c) * 2 > i) {
        std::vector<std::uint32_t> all(i);
        for (std::uint32_t j = 0; j < i; ++j) all[j] = j;
        std::shuffle(all.begin(), all.end(), rng);
        list.assign(all.begin(), all.begin() + c);
      } else {
        std::unordered_set<std::uint32_t> chosen;
        while (static_cast<int>(chosen.size()) < c) {
          const auto j = static_cast<std::uint32_t>(uniform_index(i));
          if (chosen.insert(j).second) list.push_back(j);
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& list = cited[i];
    std::sort(list.begin(), list.end());
    for (auto j : list) {
      RawReference ref;
      ref.doi = doi_of(j);
      ref.title = title_of(j);
      ref.year = out.records[j].year;
      out.records[i].references.push_back(std::move(ref));
    }
  }

  out.corpus = corpus::resolve_papers(out.records);
  auto& s = out.stats;
  s.papers = n;
  for (const auto& p : paper_authors) s.author_slots += p.size();
  for (const auto& c : cited) s.citations += c.size();
  s.distinct_authors = static_cast<std::size_t>(
      std::count_if(author_papers.begin(), author_papers.end(), [](const auto& v) { return !v.empty(); }));
  s.mean_authors = static_cast<double>(s.author_slots) / static_cast<double>(n);
  s.mean_citations = static_cast<double>(s.citations) / static_cast<double>(n);
  return out;
}

void write_jsonl(const std::vector<RawRecord>& records, std::ostream& out) {
  for (const auto& r : records) out << corpus::record_to_json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Oracles

int OracleResult::index_of(PaperId paper) const {
  auto it = std::lower_bound(papers.begin(), papers.end(), paper);
  if (it == papers.end() || *it != paper) {
    throw ContractViolation("paper " + std::to_string(paper) + " not in oracle slice");
  }
  return static_cast<int>(it - papers.begin());
}

std::optional<int> OracleResult::distance(PaperId a, PaperId b) const {
  const int d = distances(index_of(a), index_of(b));
  return d < 0 ? std::nullopt : std::optional<int>(d);
}

OracleResult oracle_distances(const corpus::Corpus& corpus, int year, graph::FlowMode mode) {
  OracleResult result;
  result.year = year;
  for (const auto& p : corpus.papers) {
    if (p.year && *p.year <= year) result.papers.push_back(p.paper_id);
  }
  const auto n = result.papers.size();
  if (n > kOracleMaxPapers) throw Error("oracle refuses slices above " + std::to_string(kOracleMaxPapers) + " papers");

  auto share_author = [&](const corpus::PaperRecord& a, const corpus::PaperRecord& b) {
    for (const auto& k : a.author_keys) {
      if (std::find(b.author_keys.begin(), b.author_keys.end(), k) != b.author_keys.end()) return true;
    }
    return false;
  };
  std::vector<std::vector<int>> adjacency(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (share_author(corpus.papers[result.papers[i]], corpus.papers[result.papers[j]])) {
        adjacency[i].push_back(static_cast<int>(j));
        adjacency[j].push_back(static_cast<int>(i));
      }
    }
  }

  const auto ni = static_cast<Eigen::Index>(n);
  result.distances = Eigen::MatrixXi::Constant(ni, ni, -1);
  result.flow = Eigen::MatrixXi::Zero(ni, ni);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<int> edges(n, -1);
    edges[s] = 0;
    std::deque<int> queue{static_cast<int>(s)};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v : adjacency[static_cast<std::size_t>(u)]) {
        if (edges[static_cast<std::size_t>(v)] < 0) {
          edges[static_cast<std::size_t>(v)] = edges[static_cast<std::size_t>(u)] + 1;
          queue.push_back(v);
        }
      }
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (t == s) {
        result.distances(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = 0;
        continue;
      }
      const int e = edges[t];
      result.distances(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = e < 0 ? -1 : e - 1;
      const auto& a = corpus.papers[result.papers[s]];
      const auto& b = corpus.papers[result.papers[t]];
      const bool a_cites_b = std::find(a.cited_ids.begin(), a.cited_ids.end(), b.paper_id) != a.cited_ids.end();
      const bool b_cites_a = std::find(b.cited_ids.begin(), b.cited_ids.end(), a.paper_id) != b.cited_ids.end();
      bool flow = false;
      if (a_cites_b || b_cites_a) {
        const bool shared = share_author(a, b);
        if (!shared) {
          flow = true;
        } else if (mode == graph::FlowMode::relaxed) {
          auto has_new = [](const corpus::PaperRecord& citing, const corpus::PaperRecord& cited_paper) {
            for (const auto& k : citing.author_keys) {
              if (std::find(cited_paper.author_keys.begin(), cited_paper.author_keys.end(), k) ==
                  cited_paper.author_keys.end()) {
                return true;
              }
            }
            return false;
          };
          flow = (a_cites_b && has_new(a, b)) || (b_cites_a && has_new(b, a));
        }
      }
      result.flow(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = flow ? 1 : 0;
    }
  }
  return result;
}

std::vector<PairObservation> oracle_pairs(const corpus::Corpus& corpus, graph::FlowMode mode) {
  std::vector<int> years;
  for (const auto& p : corpus.papers) {
    if (p.year) years.push_back(*p.year);
  }
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());

  auto flag = [](const std::optional<std::string>& a, const std::optional<std::string>& b) {
    return (a && b) ? std::optional<bool>(*a == *b) : std::nullopt;
  };
  std::vector<PairObservation> out;
  for (int year : years) {
    const auto oracle = oracle_distances(corpus, year, mode);
    for (PaperId a : oracle.papers) {
      const auto& pa = corpus.papers[a];
      if (*pa.year != year) continue;
      for (PaperId b : oracle.papers) {
        const auto& pb = corpus.papers[b];
        if (b == a || (*pb.year == year && b < a)) continue;
        PairObservation obs;
        obs.x_id = std::min(a, b);
        obs.y_id = std::max(a, b);
        obs.eval_year = year;
        const auto d = oracle.distance(a, b);
        obs.distance = d ? graph::Distance::finite(*d) : graph::Distance::infinite();
        obs.flow = oracle.flow(oracle.index_of(a), oracle.index_of(b)) != 0;
        obs.same_country = flag(pa.country, pb.country);
        if (pa.region && pb.region) {
          obs.same_region = *pa.region == *pb.region && pa.country == pb.country;
        }
        out.push_back(obs);
      }
    }
  }
  return out;
}

regress::RegressionModel oracle_fit(const sample::WeightedSample& sample,
                                    const regress::CohortSpec& spec, int d_max,
                                    const regress::SolverConfig& config) {
  using regress::CohortSpec;
  using regress::FitError;
  using regress::FitFailure;

  // Own cohort filter and encoding: rows of [distance one-hot..., geo].
  const bool joint = spec.kind != CohortSpec::Kind::distance_only;
  const bool country_flag = spec.kind == CohortSpec::Kind::joint_country ||
                            spec.cohort == graph::Cohort::same_country ||
                            spec.cohort == graph::Cohort::diff_country;
  std::vector<std::vector<double>> rows;
  std::vector<double> weight, label;
  regress::RegressionModel model;
  model.spec = spec;
  model.d_max = d_max;
  for (std::size_t i = 0; i < sample.observations.size(); ++i) {
    const auto& o = sample.observations[i];
    std::optional<bool> flag;
    if (joint || spec.cohort != graph::Cohort::all) {
      flag = country_flag ? o.same_country : o.same_region;
      if (!flag) {
        ++model.diagnostics.n_rejected;
        continue;
      }
    }
    if (!joint) {
      const bool want_same = spec.cohort == graph::Cohort::same_country || spec.cohort == graph::Cohort::same_region;
      if (spec.cohort != graph::Cohort::all && *flag != want_same) continue;
    }
    if (o.distance.kind() == graph::Distance::Kind::finite && o.distance.value() == 0) {
      ++model.diagnostics.n_zero_distance;
      continue;
    }
    std::vector<double> x(static_cast<std::size_t>(d_max) + (joint ? 1 : 0), 0.0);
    if (o.distance.kind() == graph::Distance::Kind::finite && o.distance.value() <= d_max) {
      x[static_cast<std::size_t>(o.distance.value() - 1)] = 1.0;
    } else if (o.distance.kind() == graph::Distance::Kind::finite) {
      ++model.diagnostics.n_folded;
    }
    if (joint) x.back() = *flag ? 1.0 : 0.0;
    rows.push_back(std::move(x));
    weight.push_back(sample.weights[i]);
    label.push_back(o.flow ? 1.0 : 0.0);
  }
  model.diagnostics.n_included = rows.size();

  double total = 0.0, positive = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    total += weight[i];
    positive += weight[i] * label[i];
  }
  if (rows.empty() || total == 0.0) throw FitError(FitFailure::empty, "empty cohort");
  if (positive == 0.0 || positive == total) {
    throw FitError(FitFailure::degenerate_cohort, "degenerate cohort: a single outcome class");
  }
  model.diagnostics.weight_total = total;

  const std::size_t width = rows.front().size();
  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < width; ++j) {
    for (const auto& r : rows) {
      if (r[j] != 0.0) {
        used.push_back(j);
        break;
      }
    }
  }
  const std::size_t dim = used.size() + 1;
  const double ridge = config.ridge;

  // Mean (per unit weight) penalized log-likelihood and its gradient.
  auto evaluate = [&](const std::vector<double>& theta, std::vector<double>* grad) {
    double f = 0.0;
    if (grad) grad->assign(dim, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double z = theta[0];
      for (std::size_t c = 0; c < used.size(); ++c) z += theta[c + 1] * rows[i][used[c]];
      // log(1 + e^z) computed stably
      const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      f += weight[i] * (label[i] * z - softplus);
      if (grad) {
        const double r = weight[i] * (label[i] - 1.0 / (1.0 + std::exp(-z)));
        (*grad)[0] += r;
        for (std::size_t c = 0; c < used.size(); ++c) (*grad)[c + 1] += r * rows[i][used[c]];
      }
    }
    for (std::size_t c = 1; c < dim; ++c) {
      f -= 0.5 * ridge * theta[c] * theta[c];
      if (grad) (*grad)[c] -= ridge * theta[c];
    }
    if (grad) {
      for (auto& g : *grad) g /= total;
    }
    return f / total;
  };
  auto max_abs = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  };

  std::vector<double> theta(dim, 0.0), grad, prev_theta, prev_grad;
  double f = evaluate(theta, &grad);
  double step = 1.0;
  const double target = std::min(config.tolerance, 1e-12);
  const int max_iterations = 200000;
  const double good_enough = std::max(target, 1e-10);
  std::vector<double> best_theta = theta, best_grad = grad;
  double best_f = f;
  int iter = 0, stalled = 0;
  for (; iter < max_iterations && max_abs(grad) > target; ++iter) {
    // near the optimum f stops resolving progress; settle for the floor
    if (max_abs(best_grad) <= good_enough && ++stalled > 2000) break;
    if (!prev_grad.empty()) {
      // Barzilai-Borwein trial step for the ascent direction.
      double ss = 0.0, sy = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double s = theta[c] - prev_theta[c];
        const double y = grad[c] - prev_grad[c];
        ss += s * s;
        sy += s * y;
      }
      step = sy < 0.0 ? ss / -sy : step * 2.0;
    }
    const double g2 = [&] {
      double acc = 0.0;
      for (double g : grad) acc += g * g;
      return acc;
    }();
    std::vector<double> candidate(dim), candidate_grad;
    double f_candidate = 0.0;
    bool accepted = false;
    for (int halving = 0; halving < 80; ++halving) {
      for (std::size_t c = 0; c < dim; ++c) candidate[c] = theta[c] + step * grad[c];
      f_candidate = evaluate(candidate, &candidate_grad);
      // below ~1e-7 the objective no longer resolves progress, so plain BB
      // steps run unchecked unless the gradient blows up
      const bool local = max_abs(grad) < 1e-7 && max_abs(candidate_grad) < 1e-5;
      if (local || f_candidate >= f + 1e-4 * step * g2 - 1e-15 * (std::abs(f) + 1.0)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    prev_theta = theta;
    prev_grad = grad;
    theta = candidate;
    grad = candidate_grad;
    f = f_candidate;
    if (max_abs(grad) < max_abs(best_grad)) {
      best_theta = theta;
      best_grad = grad;
      best_f = f;
    }
  }
  theta = std::move(best_theta);
  grad = std::move(best_grad);
  f = best_f;
  if (max_abs(grad) > good_enough) {
    throw FitError(FitFailure::non_convergence, "oracle gradient ascent did not converge after " + std::to_string(iter) + " iterations");
  }

  model.intercept = theta[0];
  model.distance.assign(static_cast<std::size_t>(d_max), std::nullopt);
  for (std::size_t c = 0; c < used.size(); ++c) {
    if (used[c] < static_cast<std::size_t>(d_max)) {
      model.distance[used[c]] = theta[c + 1];
    } else {
      model.geo = theta[c + 1];
    }
  }
  model.diagnostics.iterations = iter;
  model.diagnostics.grad_norm = max_abs(grad);
  model.diagnostics.log_likelihood = f * total;
  return model;
}

}  // namespace knowflow::synth
