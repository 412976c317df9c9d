#include <spillover/damage.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace spillover::damage {

double BridgeModel::apply(double ia_amount) const { return std::exp(intercept) * std::pow(ia_amount, slope); }

BridgeModel fit_ia_nfip_bridge(std::span<const ingest::BridgePair> pairs) {
  if (pairs.size() < 3) throw InvalidArgument("bridge fit needs at least three pairs");
  const auto n = static_cast<Index>(pairs.size());
  Vector x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    if (!(p.ia_amount > 0.0) || !(p.nfip_amount > 0.0)) throw InvalidArgument("bridge amounts must be positive");
    x(i) = std::log(p.ia_amount);
    y(i) = std::log(p.nfip_amount);
  }
  const Vector xc = x.array() - x.mean();
  const Vector yc = y.array() - y.mean();
  const double sxx = xc.squaredNorm();
  if (!(sxx > 0.0) || sxx <= 1e-24 * x.squaredNorm()) throw InvalidArgument("bridge regressor has zero variance");

  BridgeModel model;
  model.n = pairs.size();
  model.slope = xc.dot(yc) / sxx;
  model.intercept = y.mean() - model.slope * x.mean();
  const double syy = yc.squaredNorm();
  const double rss = (yc - model.slope * xc).squaredNorm();
  model.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  if (!(model.slope > 0.0)) {
    model.warnings.push_back("bridge slope is not positive; IA to NFIP transform is not monotone increasing");
  }
  return model;
}

MatchResult match_claims_to_parcels(std::span<const ingest::ClaimRecord> claims,
                                    std::span<const ingest::ParcelRecord> parcels, double max_distance_miles) {
  MatchResult result;
  if (claims.empty()) return result;
  if (parcels.empty()) {
    result.unmatched.resize(claims.size());
    std::iota(result.unmatched.begin(), result.unmatched.end(), std::size_t{0});
    return result;
  }
  if (!(max_distance_miles > 0.0)) throw InvalidArgument("match distance must be positive");

  std::vector<double> lons, lats;
  for (const auto& p : parcels) {
    lons.push_back(p.lon);
    lats.push_back(p.lat);
  }
  const auto projection = geo::LocalProjection::centered_on(lons, lats);
  const geo::GridIndex grid(projection.to_miles(lons, lats), max_distance_miles);

  std::vector<std::size_t> order(parcels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return parcels[a].parcel_id < parcels[b].parcel_id; });
  std::vector<std::size_t> rank(parcels.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

  std::vector<std::optional<ClaimMatch>> slots(claims.size());
  const auto count = static_cast<std::ptrdiff_t>(claims.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto& c = claims[static_cast<std::size_t>(i)];
    const Eigen::Vector2d q = projection.to_miles(c.lon, c.lat);
    if (auto hit = grid.nearest_within(q, max_distance_miles, rank)) {
      const double d = (grid.points().row(*hit).transpose() - q).norm();
      slots[static_cast<std::size_t>(i)] = ClaimMatch{static_cast<std::size_t>(i), static_cast<std::size_t>(*hit), d};
    }
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      result.matched.push_back(*slots[i]);
    } else {
      result.unmatched.push_back(i);
    }
  }
  return result;
}

std::vector<PdeRecord> compute_pde(std::span<const ingest::ClaimRecord> claims,
                                   std::span<const ingest::ParcelRecord> parcels, const MatchResult& matches,
                                   const std::optional<BridgeModel>& bridge, double pde_cap) {
  if (!(pde_cap > 0.0)) throw InvalidArgument("pde cap must be positive");
  struct Totals {
    double nfip = 0.0;
    double ia = 0.0;
    bool has_nfip = false;
  };
  std::map<std::size_t, Totals> by_parcel;
  for (const auto& m : matches.matched) {
    const auto& c = claims[m.claim];
    auto& t = by_parcel[m.parcel];
    if (c.source == ingest::ClaimSource::NFIP) {
      t.nfip += c.amount;
      t.has_nfip = true;
    } else {
      t.ia += c.amount;
    }
  }

  std::vector<PdeRecord> out;
  out.reserve(by_parcel.size());
  for (const auto& [parcel_index, t] : by_parcel) {
    const auto& parcel = parcels[parcel_index];
    if (!(parcel.market_value > 0.0)) throw InvalidArgument("parcel " + parcel.parcel_id + " has nonpositive market value");
    PdeRecord r;
    r.parcel_id = parcel.parcel_id;
    r.cbg_id = parcel.cbg_id;
    r.market_value = parcel.market_value;
    if (t.has_nfip) {
      r.claim_value = t.nfip;
      r.source = ingest::ClaimSource::NFIP;
    } else {
      if (!bridge) throw InvalidArgument("IA-only parcel " + parcel.parcel_id + " needs a fitted bridge model");
      r.claim_value = bridge->apply(t.ia);
      r.source = ingest::ClaimSource::IA;
    }
    const double ratio = r.claim_value / r.market_value;
    r.capped = ratio > pde_cap;
    r.pde = r.capped ? pde_cap : ratio;
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.parcel_id < b.parcel_id; });
  return out;
}

std::vector<CbgDamage> aggregate_cbg_damage(std::span<const PdeRecord> records, const ingest::CbgIndex& index) {
  std::vector<std::vector<double>> values(index.size());
  for (const auto& r : records) {
    auto i = index.find(r.cbg_id);
    if (!i) throw InvalidArgument("PDE record for unknown CBG " + r.cbg_id);
    values[*i].push_back(r.pde);
  }
  std::vector<CbgDamage> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto& d = out[i];
    d.cbg_id = index.at(i).cbg_id;
    const auto& v = values[i];
    d.nc = v.size();
    if (v.empty()) continue;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    d.mp = mean;
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      d.sdp = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    d.mdp = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x > kMajorDamageThreshold; }));
  }
  return out;
}

void write_pde_records(std::ostream& out, std::span<const PdeRecord> records) {
  csv::Writer w(out);
  w.row({"parcel_id", "cbg_id", "claim_value", "market_value", "pde", "capped", "source"});
  for (const auto& r : records) {
    w.row({r.parcel_id, r.cbg_id, csv::format_number(r.claim_value), csv::format_number(r.market_value),
           csv::format_number(r.pde), r.capped ? "1" : "0", ingest::to_string(r.source)});
  }
}

void write_cbg_damage(std::ostream& out, std::span<const CbgDamage> rows) {
  csv::Writer w(out);
  w.row({"cbg_id", "nc", "mp", "sdp", "mdp"});
  for (const auto& d : rows) {
    w.row({d.cbg_id, std::to_string(d.nc), csv::format_number(d.mp), csv::format_number(d.sdp), std::to_string(d.mdp)});
  }
}

std::vector<CbgDamage> read_cbg_damage(const csv::Table& table) {
  table.require_columns({"cbg_id", "nc", "mp", "sdp", "mdp"});
  std::vector<CbgDamage> out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    auto nc = csv::parse_integer(table.at(r, "nc"));
    auto mp = csv::parse_double(table.at(r, "mp"));
    auto sdp = csv::parse_double(table.at(r, "sdp"));
    auto mdp = csv::parse_integer(table.at(r, "mdp"));
    if (!nc || !mp || !sdp || !mdp) throw InvalidArgument("cbg_damage row " + std::to_string(r + 1) + " is malformed");
    out.push_back({table.at(r, "cbg_id"), static_cast<std::size_t>(*nc), *mp, *sdp, static_cast<std::size_t>(*mdp)});
  }
  return out;
}

}  // namespace spillover::damage
