#pragma once

// A hand-constructed reference dataset with known-by-construction feature
// values. The seven area indicators are affine copies of two orthogonal
// latent series (an "economy" block of four columns and a "demographics"
// block of three), so the correlation matrix is exactly block-structured:
// eigenvalues {4, 3, 0...}, first component = half the economy indicator sum,
// second = economy-orthogonal demographics sum. The latent series are pinned
// on 2009-2013 to produce specific projection values and solved on the free
// years so the training window has exact zero mean, unit sample variance and
// zero cross-correlation.

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "feedercast/domain.hpp"

namespace fixture {

struct ReferenceData {
  feedercast::domain::FeederHistory feeder;  // summer history, 2008..2014
  feedercast::domain::AreaHistory area;      // 2001..2015
  int pca_first_year = 2001;
  int pca_last_year = 2015;
  std::map<int, double> ep1;  // expected projections, 2009..2013
  std::map<int, double> ep2;
};

inline ReferenceData reference_data() {
  ReferenceData data;
  constexpr int first = 2001, last = 2015, n = last - first + 1;

  const std::array<int, 5> pinned_years = {2009, 2010, 2011, 2012, 2013};
  const std::array<double, 5> ep1_pinned = {-0.64, -0.16, 0.33, -0.06, -0.24};
  const std::array<double, 5> ep2_pinned = {0.44, 0.31, -0.31, -0.17, 0.80};
  const double root3 = std::sqrt(3.0);

  // Latent values implied by the pinned projections: first component scores
  // are 2t, second are sqrt(3)*s.
  std::array<double, n> t{}, s{};
  std::array<bool, n> is_pinned{};
  for (std::size_t i = 0; i < pinned_years.size(); ++i) {
    const int idx = pinned_years[i] - first;
    t[idx] = ep1_pinned[i] / 2.0;
    s[idx] = ep2_pinned[i] / root3;
    is_pinned[idx] = true;
    data.ep1[pinned_years[i]] = ep1_pinned[i];
    data.ep2[pinned_years[i]] = ep2_pinned[i];
  }

  // Solve the ten free years so that over all n years: sum t = sum s = 0,
  // sum t^2 = sum s^2 = n-1, and t.s = 0.
  std::vector<int> free_idx;
  for (int i = 0; i < n; ++i)
    if (!is_pinned[i]) free_idx.push_back(i);
  const int m = static_cast<int>(free_idx.size());  // 10

  double t1 = 0, t2 = 0, s1 = 0, s2 = 0, ts = 0;
  for (int i = 0; i < n; ++i) {
    t1 += t[i];
    t2 += t[i] * t[i];
    s1 += s[i];
    s2 += s[i] * s[i];
    ts += t[i] * s[i];
  }

  // Two unit vectors on the free slots, both orthogonal to the all-ones
  // vector and to each other.
  std::vector<double> a(m), b(m);
  for (int i = 0; i < m; ++i) a[i] = (i % 2 == 0) ? 1.0 : -1.0;
  const std::array<double, 10> b_pattern = {1, 1, -1, -1, 1, 1, -1, -1, 0, 0};
  for (int i = 0; i < m; ++i) b[i] = b_pattern[i];
  double na = 0, nb = 0;
  for (int i = 0; i < m; ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  for (int i = 0; i < m; ++i) {
    a[i] /= std::sqrt(na);
    b[i] /= std::sqrt(nb);
  }

  const double mu_t = -t1 / m;
  const double p = std::sqrt((n - 1) - t2 - m * mu_t * mu_t);
  for (int i = 0; i < m; ++i) t[free_idx[i]] = mu_t + p * a[i];

  const double mu_s = -s1 / m;
  const double qa = (-ts - m * mu_t * mu_s) / p;
  const double qb = std::sqrt((n - 1) - s2 - m * mu_s * mu_s - qa * qa);
  for (int i = 0; i < m; ++i) s[free_idx[i]] = mu_s + qa * a[i] + qb * b[i];

  // Column scales; every column is an affine copy of its latent series with a
  // fixed mean/std ratio, so standardization recovers the latents exactly.
  const double u_ratio = 0.01;
  const double v_ratio = -0.02 * root3 / 3.0;

  const std::map<int, double> etaa_summer = {
      {2009, 0.7}, {2010, -1.3}, {2011, 3.4}, {2012, -2.2}, {2013, 1.8}};
  for (int y = first; y <= last; ++y) {
    const double tv = t[y - first], sv = s[y - first];
    feedercast::domain::AreaYearFeatures f;
    f.year = y;
    f.gdp_growth = 2.0 * (u_ratio + tv);
    f.employment_growth = 1.5 * (v_ratio + sv);
    f.industrial_production_index = 9.0 * (u_ratio + tv);
    f.commodity_price = 55.0 * (u_ratio + tv);
    f.population_growth = 0.8 * (v_ratio + sv);
    f.net_migration = 12000.0 * (v_ratio + sv);
    f.housing_starts = 4000.0 * (u_ratio + tv);
    auto it = etaa_summer.find(y);
    f.etaa_summer = it == etaa_summer.end() ? 0.0 : it->second;
    f.etaa_winter = 0.0;
    data.area.years.push_back(f);
  }

  // Feeder history with peaks and expected load changes matching the
  // reference sequences.
  const std::array<double, 7> peaks = {433, 502, 554, 550, 521, 537, 549};
  const std::array<double, 7> mcnlc = {0, 42, 34, 0, -21, 41, 0};
  data.feeder.feeder_id = "0050";
  data.feeder.season = feedercast::domain::Season::summer;
  for (int i = 0; i < 7; ++i) {
    feedercast::domain::FeederYearRecord rec;
    rec.feeder_id = data.feeder.feeder_id;
    rec.year = 2008 + i;
    rec.season = data.feeder.season;
    rec.peak_demand = peaks[i];
    rec.residential_at_peak = peaks[i] * 0.5;
    rec.commercial_at_peak = peaks[i] * 0.3;
    rec.industrial_at_peak = peaks[i] * 0.2;
    rec.mcnlc = mcnlc[i];
    data.feeder.records.push_back(rec);
  }
  return data;
}

}  // namespace fixture
