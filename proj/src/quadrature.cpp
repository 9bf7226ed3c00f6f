#include "heis/quadrature.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <cstdlib>
#include <queue>

#include "heis/errors.hpp"
#include "heis/kernels.hpp"
#include "heis/parallel.hpp"

namespace heis {

namespace {

constexpr std::size_t kMaxComponents = 8;
constexpr int kMaxSing = 2;

// ---- Gauss-Legendre nodes on [-1, 1] ----

struct GaussRule {
  std::vector<double> x, w;
};

GaussRule gauss_legendre(int n) {
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton from the Chebyshev guess.
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::fabs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (t * p1 - p0) / (t * t - 1.0);
    r.x[n - 1 - i] = t;
    r.w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  return r;
}

// ---- common excision setup ----

struct ExcisionSetup {
  std::vector<Singularity> sing;  // resolved radii
  int active = 0;
};

ExcisionSetup resolve_excision(const std::vector<Singularity>& sing, double support_radius,
                               const QuadratureSpec& spec) {
  ExcisionSetup ex;
  double base = spec.exclusion > 0 ? spec.exclusion : 0.02 * support_radius;
  double shrink = 1.0;
  if (spec.budget_coupled_exclusion && spec.budget > 0 && spec.reference_budget > 0)
    shrink = std::pow(spec.reference_budget / spec.budget, 0.25);
  shrink = std::clamp(shrink, 0.05, 1.0);
  for (const auto& s : sing) {
    double r = (s.exclusion > 0 ? s.exclusion : base) * shrink;
    ex.sing.push_back({s.p, r});
  }
  if (ex.sing.size() > kMaxSing) ex.sing.resize(kMaxSing);
  ex.active = static_cast<int>(ex.sing.size());
  return ex;
}

// bucket: -1 dropped, 0 outer, 1 + 2*s annulus [r/2, r) of singularity s,
// 2 + 2*s annulus [r/4, r/2).
int classify(const Vec4& y, const ExcisionSetup& ex) {
  for (int s = 0; s < ex.active; ++s) {
    double d = norm(y - ex.sing[s].p);
    double r = ex.sing[s].exclusion;
    if (d < 0.25 * r) return -1;
    if (d < 0.5 * r) return 2 + 2 * s;
    if (d < r) return 1 + 2 * s;
  }
  return 0;
}

// Geometric tail extrapolation from the two finest annulus masses. Returns
// the estimated mass inside the excised core and its error estimate.
std::pair<double, double> extrapolate_core(double ann1, double ann2) {
  double d1 = ann1, d2 = ann2;
  if (std::fabs(d1) < 1e-300) return {0.0, std::fabs(d2)};
  double rho = d2 / d1;
  if (!(rho > 0.0) || rho >= 0.9) return {0.0, std::fabs(d2)};
  double core = d2 * rho / (1.0 - rho);
  double err = std::fabs(core * rho);
  return {core, err};
}

double weight_of(Weight w, const Vec4& y) { return w == Weight::PlaneMeasure ? norm(y) : 1.0; }

// ---- adaptive cell integrator ----

struct Cell {
  Vec4 lo, hi;
  double err = 0.0;
  int split_dim = 0;
  bool hidden = false;  // every node zero, yet the support ball intersects
  std::uint64_t id = 0;
  std::size_t payload = 0;  // offset into the value arena
};

struct HiddenCmp {
  // sweep the largest suspect cells first
  bool operator()(const Cell& a, const Cell& b) const {
    double va = 1.0, vb = 1.0;
    for (int d = 0; d < 4; ++d) {
      va *= a.hi[d] - a.lo[d];
      vb *= b.hi[d] - b.lo[d];
    }
    if (va != vb) return va < vb;
    return a.id > b.id;
  }
};

struct CellCmp {
  bool operator()(const Cell& a, const Cell& b) const {
    if (a.err != b.err) return a.err < b.err;
    return a.id > b.id;
  }
};

struct AdaptiveResult {
  std::array<double, 5 * kMaxComponents> sums{};  // [bucket][comp]
  std::array<double, kMaxComponents> refinement_delta{};  // |I - I_half_budget|
  long long evals = 0;
  std::vector<std::pair<Vec4, Vec4>> leaves;  // for build_tree
};

class AdaptiveIntegrator {
 public:
  AdaptiveIntegrator(const MultiIntegrand& f, Weight w, const ExcisionSetup& ex)
      : f_(f), w_(w), ex_(ex), nbuckets_(1 + 2 * ex.active), ncomp_(f.components) {
    assert(ncomp_ <= kMaxComponents);
  }

  AdaptiveResult run(double budget, bool keep_leaves) {
    AdaptiveResult out;
    const Vec4& c = f_.support_center;
    double r = f_.support_radius;
    // Seed with a uniform grid: a single root cell can have every node
    // outside the inscribed support ball and report a spurious zero, and
    // structure smaller than a cell can hide between the nodes entirely.
    const int g = budget >= 6e5 ? 8 : 4;
    seed_side_ = 2.0 * f_.support_radius / g;
    std::vector<Cell> seeds;
    for (int i0 = 0; i0 < g; ++i0)
      for (int i1 = 0; i1 < g; ++i1)
        for (int i2 = 0; i2 < g; ++i2)
          for (int i3 = 0; i3 < g; ++i3) {
            Cell cell;
            int idx[4] = {i0, i1, i2, i3};
            for (int d = 0; d < 4; ++d) {
              cell.lo[d] = c[d] - r + 2.0 * r * idx[d] / g;
              cell.hi[d] = c[d] - r + 2.0 * r * (idx[d] + 1) / g;
            }
            cell.id = next_id_++;
            cell.payload = alloc_payload();
            seeds.push_back(cell);
          }
    par::ordered_map_sum(seeds.size(), [&](std::size_t k) {
      evaluate(seeds[k]);
      return 0.0;
    });
    evals_ += 57 * static_cast<long long>(seeds.size());
    for (const auto& s : seeds) {
      push_cell(s);
      add_cell(s);
    }

    const long long max_evals = static_cast<long long>(budget);
    std::array<double, kMaxComponents> half_snapshot{};
    bool snapped = false;
    while (evals_ + 57 * 2 * static_cast<long long>(batch_) <= max_evals &&
           (!pq_.empty() || !hidden_.empty())) {
      if (!snapped && 2 * evals_ >= max_evals) {
        half_snapshot = leaf_totals();
        snapped = true;
      }
      std::vector<Cell> parents;
      parents.reserve(batch_);
      // Coarse cells (uniform-coverage backlog) may fill the batch; all-zero
      // suspect cells only a quarter of it, so error-driven refinement never
      // starves. The whole sweep is capped at a fixed share of the budget so
      // small budgets still do useful error-driven work.
      const std::size_t suspect_cap = batch_ / 4;
      bool sweep_open = sweep_evals_ < static_cast<long long>(0.4 * budget);
      while (sweep_open && !hidden_.empty() && parents.size() < batch_) {
        const Cell& top = hidden_.top();
        double ms = 0.0;
        for (int d = 0; d < 4; ++d) ms = std::max(ms, top.hi[d] - top.lo[d]);
        bool coarse = ms > 1.01 * seed_side_;
        if (!coarse && parents.size() >= suspect_cap) break;
        parents.push_back(top);
        hidden_.pop();
      }
      sweep_evals_ += 2 * 57 * static_cast<long long>(parents.size());
      std::size_t mandatory = parents.size();
      std::size_t nb_err = std::min<std::size_t>(batch_ - parents.size(), pq_.size());
      for (std::size_t i = 0; i < nb_err; ++i) {
        if (pq_.top().err == 0.0) break;
        parents.push_back(pq_.top());
        pq_.pop();
      }
      if (parents.empty()) {
        if (std::getenv("HEIS_QUAD_DEBUG"))
          std::fprintf(stderr, "adaptive stop: evals=%lld pq=%zu (top err=%g) hidden=%zu\n",
                       evals_, pq_.size(), pq_.empty() ? -1.0 : pq_.top().err, hidden_.size());
        break;  // nothing refinable left
      }
      std::size_t nb = parents.size();
      std::vector<Cell> children(2 * nb);
      for (std::size_t i = 0; i < nb; ++i) {
        const Cell& p = parents[i];
        int dim = p.split_dim;
        if (i < mandatory) {  // sweep cells must shrink their widest side
          dim = 0;
          for (int d = 1; d < 4; ++d)
            if (p.hi[d] - p.lo[d] > p.hi[dim] - p.lo[dim]) dim = d;
        }
        double mid = 0.5 * (p.lo[dim] + p.hi[dim]);
        Cell a = p, b = p;
        a.hi[dim] = mid;
        b.lo[dim] = mid;
        a.id = next_id_++;
        b.id = next_id_++;
        a.payload = alloc_payload();
        b.payload = alloc_payload();
        children[2 * i] = a;
        children[2 * i + 1] = b;
      }
      par::ordered_map_sum(children.size(), [&](std::size_t k) {
        evaluate(children[k]);
        return 0.0;
      });
      evals_ += static_cast<long long>(children.size()) * 57;
      // keep the per-leaf running totals current for the snapshot
      for (std::size_t i = 0; i < nb; ++i) subtract_cell(parents[i]);
      for (auto& ch : children) add_cell(ch);
      for (std::size_t i = 0; i < nb; ++i) retire_payload(parents[i].payload);
      for (auto& ch : children) push_cell(ch);
    }

    if (std::getenv("HEIS_QUAD_DEBUG"))
      std::fprintf(stderr, "adaptive done: evals=%lld/%lld pq=%zu hidden=%zu\n", evals_,
                   max_evals, pq_.size(), hidden_.size());
    // Final accumulation over leaves in id order (deterministic).
    std::vector<Cell> leaves;
    leaves.reserve(pq_.size() + hidden_.size());
    while (!pq_.empty()) {
      leaves.push_back(pq_.top());
      pq_.pop();
    }
    while (!hidden_.empty()) {
      leaves.push_back(hidden_.top());
      hidden_.pop();
    }
    std::sort(leaves.begin(), leaves.end(),
              [](const Cell& a, const Cell& b) { return a.id < b.id; });
    for (const auto& cell : leaves) {
      const double* v = arena_.data() + cell.payload;
      for (int b = 0; b < nbuckets_; ++b)
        for (std::size_t k = 0; k < ncomp_; ++k)
          out.sums[b * kMaxComponents + k] += v[b * ncomp_ + k];
      if (keep_leaves) out.leaves.emplace_back(cell.lo, cell.hi);
    }
    for (std::size_t k = 0; k < ncomp_; ++k) {
      double total = 0.0;
      for (int b = 0; b < nbuckets_; ++b) total += out.sums[b * kMaxComponents + k];
      out.refinement_delta[k] = snapped ? std::fabs(total - half_snapshot[k])
                                        : std::fabs(total) * 1e-2;
    }
    out.evals = evals_;
    return out;
  }

 private:
  std::size_t alloc_payload() {
    if (!free_payloads_.empty()) {
      std::size_t p = free_payloads_.back();
      free_payloads_.pop_back();
      return p;
    }
    std::size_t p = arena_.size();
    arena_.resize(p + nbuckets_ * ncomp_, 0.0);
    return p;
  }
  void retire_payload(std::size_t p) { free_payloads_.push_back(p); }

  void push_cell(const Cell& c) {
    double maxside = 0.0;
    for (int d = 0; d < 4; ++d) maxside = std::max(maxside, c.hi[d] - c.lo[d]);
    // Coarse cells are split unconditionally: the rule's nodes can miss
    // small-support structure entirely and report a confident zero. Cells
    // whose nodes all read zero stay suspect down to a finer scale.
    bool must_split = maxside > 1.01 * seed_side_ ||
                      (c.hidden && maxside > 0.51 * seed_side_);
    if (must_split)
      hidden_.push(c);
    else
      pq_.push(c);
  }

  std::array<double, kMaxComponents> leaf_totals() const {
    return running_;
  }
  void add_cell(const Cell& cell) {
    const double* v = arena_.data() + cell.payload;
    for (int b = 0; b < nbuckets_; ++b)
      for (std::size_t k = 0; k < ncomp_; ++k) running_[k] += v[b * ncomp_ + k];
  }
  void subtract_cell(const Cell& cell) {
    const double* v = arena_.data() + cell.payload;
    for (int b = 0; b < nbuckets_; ++b)
      for (std::size_t k = 0; k < ncomp_; ++k) running_[k] -= v[b * ncomp_ + k];
  }

  // Degree-7 fully symmetric cubature with the embedded degree-5 estimate
  // (Genz-Malik). 57 nodes per cell in dimension 4; the fourth differences
  // along each axis pick the split direction.
  void evaluate(Cell& cell) {
    double* sums = arena_.data() + cell.payload;
    std::fill(sums, sums + nbuckets_ * ncomp_, 0.0);
    Vec4 c, h;
    double vol = 1.0;
    for (int d = 0; d < 4; ++d) {
      c[d] = 0.5 * (cell.lo[d] + cell.hi[d]);
      h[d] = 0.5 * (cell.hi[d] - cell.lo[d]);
      vol *= 2.0 * h[d];
    }
    // Skip cells entirely outside the support ball.
    double corner_gap = 0.0;
    for (int d = 0; d < 4; ++d) {
      double g = std::max(std::fabs(c[d] - f_.support_center[d]) - h[d], 0.0);
      corner_gap += g * g;
    }
    if (corner_gap > f_.support_radius * f_.support_radius) {
      cell.err = 0.0;
      cell.hidden = false;
      return;
    }

    constexpr int dim = 4;
    const double l2 = std::sqrt(9.0 / 70.0);
    const double l3 = std::sqrt(9.0 / 10.0);
    const double l5 = std::sqrt(9.0 / 19.0);
    const double w1 = (12824.0 - 9120.0 * dim + 400.0 * dim * dim) / 19683.0;
    const double w2 = 980.0 / 6561.0;
    const double w3 = (1820.0 - 400.0 * dim) / 19683.0;
    const double w4 = 200.0 / 19683.0;
    const double w5 = 6859.0 / 19683.0 / 16.0;
    const double e1 = (729.0 - 950.0 * dim + 50.0 * dim * dim) / 729.0;
    const double e2 = 245.0 / 486.0;
    const double e3 = (265.0 - 100.0 * dim) / 1458.0;
    const double e4 = 25.0 / 729.0;

    std::array<double, kMaxComponents> full{}, embedded{}, abs_total{};
    int zero_nodes = 0, live_nodes = 0;
    double min_live_density = 0.0;
    bool have_live = false;
    // per-axis fourth differences for the split choice
    std::array<double, 4> divdiff{};
    std::array<double, kMaxComponents> f0{};
    std::array<double, kMaxComponents> buf{};

    auto add_node = [&](const Vec4& y, double wf, double we, double* capture) {
      int b = classify(y, ex_);
      bool all_zero = true;
      double density = 0.0;
      if (b >= 0) {
        eval_point(y, buf.data());
        for (std::size_t k = 0; k < ncomp_; ++k) {
          double v = buf[k] * vol;
          sums[b * ncomp_ + k] += v * wf;
          full[k] += v * wf;
          embedded[k] += v * we;
          abs_total[k] += std::fabs(v) * std::fabs(wf);
          if (capture) capture[k] = buf[k];
          all_zero = all_zero && buf[k] == 0.0;
          density += std::fabs(buf[k]);
        }
      } else if (capture) {
        std::fill(capture, capture + ncomp_, 0.0);
      }
      if (all_zero) {
        ++zero_nodes;
      } else {
        ++live_nodes;
        min_live_density = have_live ? std::min(min_live_density, density) : density;
        have_live = true;
      }
    };

    add_node(c, w1, e1, f0.data());
    std::array<double, kMaxComponents> fp{}, fm{}, fp3{}, fm3{};
    for (int d = 0; d < 4; ++d) {
      Vec4 yp = c, ym = c;
      yp[d] += l2 * h[d];
      ym[d] -= l2 * h[d];
      add_node(yp, w2, e2, fp.data());
      add_node(ym, w2, e2, fm.data());
      Vec4 yp3 = c, ym3 = c;
      yp3[d] += l3 * h[d];
      ym3[d] -= l3 * h[d];
      add_node(yp3, w3, e3, fp3.data());
      add_node(ym3, w3, e3, fm3.data());
      // fourth-difference contrast, zero on quadratics:
      // |D2@l3 - (l3^2/l2^2) D2@l2| with l3^2/l2^2 = 7
      double s = 0.0;
      for (std::size_t k = 0; k < ncomp_; ++k)
        s += std::fabs(fp3[k] + fm3[k] - 2.0 * f0[k] -
                       7.0 * (fp[k] + fm[k] - 2.0 * f0[k]));
      divdiff[d] = s;
    }
    for (int da = 0; da < 4; ++da)
      for (int db = da + 1; db < 4; ++db)
        for (int sa = -1; sa <= 1; sa += 2)
          for (int sb = -1; sb <= 1; sb += 2) {
            Vec4 y = c;
            y[da] += sa * l3 * h[da];
            y[db] += sb * l3 * h[db];
            add_node(y, w4, e4, nullptr);
          }
    for (int m = 0; m < 16; ++m) {
      Vec4 y;
      for (int d = 0; d < 4; ++d) y[d] = c[d] + ((m >> d) & 1 ? l5 : -l5) * h[d];
      add_node(y, w5, 0.0, nullptr);
    }

    double err = 0.0;
    for (std::size_t k = 0; k < ncomp_; ++k) err += std::fabs(full[k] - embedded[k]);
    // Cells mixing exactly-zero and live nodes straddle a support or domain
    // edge. The misassignable sliver mass scales with the integrand size at
    // the cut: order one for a jump, vanishing for a smooth compactly
    // supported tail, so the floor uses the smallest live node density.
    if (zero_nodes > 0 && live_nodes > 0) err = std::max(err, 0.5 * vol * min_live_density);
    cell.err = err;
    // The rule saw nothing, but the support intersects the cell: mass could
    // hide between the nodes.
    cell.hidden = live_nodes == 0;
    int best = 0;
    for (int d = 1; d < 4; ++d)
      if (divdiff[d] > divdiff[best]) best = d;
    cell.split_dim = best;
  }

  void eval_point(const Vec4& y, double* buf) {
    if (norm2(y - f_.support_center) > f_.support_radius * f_.support_radius) {
      std::fill(buf, buf + ncomp_, 0.0);
      return;
    }
    f_.eval(y, buf);
    double wt = weight_of(w_, y);
    for (std::size_t k = 0; k < ncomp_; ++k) buf[k] *= wt;
  }

  const MultiIntegrand& f_;
  Weight w_;
  ExcisionSetup ex_;
  int nbuckets_;
  std::size_t ncomp_;
  std::priority_queue<Cell, std::vector<Cell>, CellCmp> pq_;
  std::priority_queue<Cell, std::vector<Cell>, HiddenCmp> hidden_;
  std::vector<double> arena_;
  std::vector<std::size_t> free_payloads_;
  std::array<double, kMaxComponents> running_{};
  double seed_side_ = 0.0;
  long long sweep_evals_ = 0;
  std::uint64_t next_id_ = 0;
  long long evals_ = 1;
  std::size_t batch_ = 16;
};

// ---- Monte Carlo integrator ----

struct McMixture {
  Vec4 support_center;
  double support_radius;
  struct Radial {
    Vec4 center;
    double radius;
  };
  std::vector<Radial> radial;
  double w_uniform = 1.0;
  double w_radial = 0.0;

  Vec4 sample(Rng& rng) const {
    double pick = rng.uniform();
    if (pick < w_uniform || radial.empty()) {
      double r = support_radius * std::pow(rng.uniform(), 0.25);
      return support_center + r * rng.sphere_dir();
    }
    std::size_t k = std::min<std::size_t>(
        static_cast<std::size_t>((pick - w_uniform) / w_radial * radial.size()),
        radial.size() - 1);
    double r = radial[k].radius * rng.uniform();
    return radial[k].center + r * rng.sphere_dir();
  }

  double density(const Vec4& y) const {
    double p = 0.0;
    double r0 = norm(y - support_center);
    if (r0 < support_radius)
      p += w_uniform / (0.5 * M_PI * M_PI * std::pow(support_radius, 4.0));
    for (const auto& rb : radial) {
      double r = norm(y - rb.center);
      if (r < rb.radius && r > 0)
        p += (w_radial / radial.size()) / (2.0 * M_PI * M_PI * rb.radius * r * r * r);
    }
    return p;
  }
};

std::vector<IntegralEstimate> integrate_mc(const MultiIntegrand& f, Weight w,
                                           const ExcisionSetup& ex, const QuadratureSpec& spec) {
  const std::size_t ncomp = f.components;
  const int nbuckets = 1 + 2 * ex.active;

  McMixture mix;
  mix.support_center = f.support_center;
  mix.support_radius = f.support_radius;
  for (const auto& s : ex.sing) {
    double gap = norm(s.p - f.support_center);
    if (gap < 1.5 * f.support_radius)
      mix.radial.push_back({s.p, gap + f.support_radius});
  }
  if (!mix.radial.empty()) {
    mix.w_uniform = 0.5;
    mix.w_radial = 0.5;
  }

  long long total = static_cast<long long>(spec.budget);
  std::size_t chunks = static_cast<std::size_t>(std::clamp<long long>(total / 16384, 32, 1024));
  long long per_chunk = total / static_cast<long long>(chunks);
  // layout per chunk: [bucket][comp] sums, then per-comp sum, sumsq
  std::size_t width = nbuckets * ncomp + 2 * ncomp;

  std::vector<double> acc = par::ordered_map_sum_multi(chunks, width, [&](std::size_t c, double* out) {
    Rng rng(spec.seed, c + 1);
    std::vector<double> buf(ncomp);
    for (long long i = 0; i < per_chunk; ++i) {
      Vec4 y = mix.sample(rng);
      double p = mix.density(y);
      if (p <= 0.0) continue;
      if (norm2(y - f.support_center) > f.support_radius * f.support_radius) continue;
      int b = classify(y, ex);
      if (b < 0) continue;
      f.eval(y, buf.data());
      double wt = weight_of(w, y) / p;
      for (std::size_t k = 0; k < ncomp; ++k) {
        double v = buf[k] * wt;
        out[b * ncomp + k] += v;
        out[nbuckets * ncomp + k] += v;
        out[nbuckets * ncomp + ncomp + k] += v * v;
      }
    }
  });

  double n = static_cast<double>(per_chunk) * static_cast<double>(chunks);
  std::vector<IntegralEstimate> est(ncomp);
  for (std::size_t k = 0; k < ncomp; ++k) {
    double mean = acc[nbuckets * ncomp + k] / n;
    double meansq = acc[nbuckets * ncomp + ncomp + k] / n;
    double var = std::max(meansq - mean * mean, 0.0);
    double se = std::sqrt(var / n);
    double value = mean;
    double err = se;
    for (int s = 0; s < ex.active; ++s) {
      auto [core, core_err] =
          extrapolate_core(acc[(1 + 2 * s) * ncomp + k] / n, acc[(2 + 2 * s) * ncomp + k] / n);
      value += core;
      err += core_err;
    }
    est[k] = {value, err, static_cast<long long>(n)};
  }
  return est;
}

MultiIntegrand resolve_support(const MultiIntegrand& f, const QuadratureSpec& spec) {
  MultiIntegrand g = f;
  if (spec.support_radius > 0) g.support_radius = spec.support_radius;
  if (g.support_radius <= 0)
    throw std::invalid_argument("integrate: integrand must declare a support radius");
  return g;
}

}  // namespace

std::vector<IntegralEstimate> integrate_multi(const MultiIntegrand& f_in, Weight w,
                                              const std::vector<Singularity>& singularities,
                                              const QuadratureSpec& spec) {
  MultiIntegrand f = resolve_support(f_in, spec);
  if (f.components > kMaxComponents)
    throw std::invalid_argument("integrate: too many components");
  ExcisionSetup ex = resolve_excision(singularities, f.support_radius, spec);

  std::vector<IntegralEstimate> est;
  if (spec.method == Method::MonteCarlo) {
    est = integrate_mc(f, w, ex, spec);
  } else {
    AdaptiveIntegrator ai(f, w, ex);
    AdaptiveResult r = ai.run(spec.budget, false);
    est.resize(f.components);
    for (std::size_t k = 0; k < f.components; ++k) {
      double value = r.sums[k];  // outer bucket
      double err = r.refinement_delta[k];
      for (int s = 0; s < ex.active; ++s) {
        double a1 = r.sums[(1 + 2 * s) * kMaxComponents + k];
        double a2 = r.sums[(2 + 2 * s) * kMaxComponents + k];
        value += a1 + a2;
        auto [core, core_err] = extrapolate_core(a1, a2);
        value += core;
        err += core_err;
      }
      est[k] = {value, err, r.evals};
    }
  }
  if (spec.tolerance > 0) {
    for (const auto& e : est)
      if (e.error_indicator > spec.tolerance)
        throw BudgetExhausted("integrate: tolerance not reached within budget", e.value,
                              e.error_indicator);
  }
  return est;
}

IntegralEstimate integrate_mu(const MultiIntegrand& f, const std::vector<Singularity>& singularities,
                              const QuadratureSpec& spec) {
  return integrate_multi(f, Weight::PlaneMeasure, singularities, spec)[0];
}

IntegralEstimate integrate_lebesgue(const MultiIntegrand& f,
                                    const std::vector<Singularity>& singularities,
                                    const QuadratureSpec& spec) {
  return integrate_multi(f, Weight::Lebesgue, singularities, spec)[0];
}

IntegralEstimate integrate_mu(const ScalarField& f, const std::vector<Singularity>& singularities,
                              const QuadratureSpec& spec) {
  MultiIntegrand m;
  m.eval = [&f](const Vec4& y, double* out) { out[0] = f.value(y); };
  m.components = 1;
  m.support_center = f.support_center;
  m.support_radius = f.support_radius;
  return integrate_mu(m, singularities, spec);
}

// ---- fixed-tree evaluation ----

std::shared_ptr<const CellTree> build_tree(const MultiIntegrand& f_in, Weight w,
                                           const QuadratureSpec& spec) {
  MultiIntegrand f = resolve_support(f_in, spec);
  ExcisionSetup ex;  // no singularities on a shared tree
  AdaptiveIntegrator ai(f, w, ex);
  AdaptiveResult r = ai.run(spec.budget, true);
  auto tree = std::make_shared<CellTree>();
  tree->leaves = std::move(r.leaves);
  tree->support_center = f.support_center;
  tree->support_radius = f.support_radius;
  return tree;
}

double integrate_on_tree(const CellTree& tree, Weight w,
                         const std::function<double(const Vec4&)>& f) {
  const double q = 1.0 / std::sqrt(3.0);
  double sum = 0.0;
  for (const auto& [lo, hi] : tree.leaves) {
    Vec4 c, h;
    double vol = 1.0;
    for (int d = 0; d < 4; ++d) {
      c[d] = 0.5 * (lo[d] + hi[d]);
      h[d] = 0.5 * (hi[d] - lo[d]);
      vol *= 2.0 * h[d];
    }
    for (int m = 0; m < 16; ++m) {
      Vec4 y;
      for (int d = 0; d < 4; ++d) y[d] = c[d] + ((m >> d) & 1 ? q : -q) * h[d];
      if (norm2(y - tree.support_center) > tree.support_radius * tree.support_radius) continue;
      sum += f(y) * weight_of(w, y) * vol / 16.0;
    }
  }
  return sum;
}

// ---- slab quadrature over pancake domains {d(z, .) <= r}, z on the axis ----

namespace {

// Half-width of the slab in the third coordinate at 3-radius s = |v|^2.
double slab_halfwidth(double s, double z1, double r) {
  double a = s + 2.0 * z1 * z1;
  double disc = a * a - s * s + r * r * r * r;
  double q = -a + std::sqrt(disc);
  return q > 0 ? std::sqrt(q) : 0.0;
}

// Integrates h over {d((z1,0,0,0), y) <= r} with resolution parameter k.
// The radial variable is substituted rho = r sin(psi) so the square-root
// vanishing of the slab width at the equator stays smooth.
double slab_integrate(double z1, double r, int k, const std::function<double(const Vec4&)>& h,
                      bool parallel) {
  GaussRule grho = gauss_legendre(2 * k);
  GaussRule gth = gauss_legendre(k);
  GaussRule g3 = gauss_legendre(k);
  int nphi = 2 * k;

  auto shell = [&](std::size_t ir) {
    double psi = 0.25 * M_PI * (grho.x[ir] + 1.0);
    double rho = r * std::sin(psi);
    double wrho = 0.25 * M_PI * grho.w[ir] * (r * std::cos(psi)) * rho * rho;
    double s = rho * rho;
    double W = slab_halfwidth(s, z1, r);
    if (W <= 0) return 0.0;
    double sum = 0.0;
    for (int it = 0; it < k; ++it) {
      double cth = gth.x[it];
      double sth = std::sqrt(std::max(1.0 - cth * cth, 0.0));
      for (int ip = 0; ip < nphi; ++ip) {
        double phi = 2.0 * M_PI * (ip + 0.5) / nphi;
        double v1 = rho * cth, v2 = rho * sth * std::cos(phi), v4 = rho * sth * std::sin(phi);
        double wang = gth.w[it] * (2.0 * M_PI / nphi);
        for (int i3 = 0; i3 < k; ++i3) {
          double w3 = W * g3.x[i3];
          Vec4 y{z1 + v1, v2, w3, v4};
          sum += h(y) * wang * W * g3.w[i3];
        }
      }
    }
    return sum * wrho;
  };

  if (parallel) return par::ordered_map_sum(grho.x.size(), shell);
  double total = 0.0;
  for (std::size_t ir = 0; ir < grho.x.size(); ++ir) total += shell(ir);
  return total;
}

int slab_resolution(double budget) {
  int k = static_cast<int>(std::pow(std::max(budget, 4096.0) / 4.0, 0.25));
  return std::max(k, 6);
}

}  // namespace

IntegralEstimate mu_ball(const PlanePoint& c, double r, const QuadratureSpec& spec) {
  if (r <= 0) throw std::invalid_argument("mu_ball: radius must be positive");
  double c1 = norm(c);  // rotate the center onto the axis; |y| and d are invariant
  auto h = [&](const Vec4& y) { return norm(y); };
  if (spec.method == Method::MonteCarlo) {
    double W0 = slab_halfwidth(0.0, c1, r);
    Vec4 z{c1, 0, 0, 0};
    double vol = std::pow(2 * r, 3.0) * 2 * W0;
    long long total = static_cast<long long>(spec.budget);
    std::size_t chunks = static_cast<std::size_t>(std::clamp<long long>(total / 16384, 32, 1024));
    long long per_chunk = total / static_cast<long long>(chunks);
    std::vector<double> acc = par::ordered_map_sum_multi(chunks, 2, [&](std::size_t ch, double* out) {
      Rng rng(spec.seed, ch + 1);
      for (long long i = 0; i < per_chunk; ++i) {
        Vec4 y{z[0] + rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-W0, W0),
               rng.uniform(-r, r)};
        if (plane_dist(y, z) > r) continue;
        double v = norm(y) * vol;
        out[0] += v;
        out[1] += v * v;
      }
    });
    double n = static_cast<double>(per_chunk * static_cast<long long>(chunks));
    double mean = acc[0] / n;
    double var = std::max(acc[1] / n - mean * mean, 0.0);
    return {mean, std::sqrt(var / n), static_cast<long long>(n)};
  }
  int k = slab_resolution(spec.budget);
  double fine = slab_integrate(c1, r, k, h, true);
  double coarse = slab_integrate(c1, r, k / 2, h, true);
  return {fine, std::fabs(fine - coarse), 4LL * k * k * k * k};
}

double compute_constant_closed_form() { return kernel_constant_integral(); }

IntegralEstimate compute_constant(const QuadratureSpec& spec) {
  if (spec.method == Method::MonteCarlo) {
    long long total = static_cast<long long>(spec.budget);
    std::size_t chunks = static_cast<std::size_t>(std::clamp<long long>(total / 16384, 32, 1024));
    long long per_chunk = total / static_cast<long long>(chunks);
    std::vector<double> acc = par::ordered_map_sum_multi(chunks, 2, [&](std::size_t c, double* out) {
      Rng rng(spec.seed, c + 1);
      for (long long i = 0; i < per_chunk; ++i) {
        double x1 = rng.uniform(-1, 1), x2 = rng.uniform(-1, 1), x4 = rng.uniform(-1, 1),
               x3 = rng.uniform(-1, 1);
        double r2 = x1 * x1 + x2 * x2 + x4 * x4;
        if (r2 * r2 + x3 * x3 > 1.0) continue;
        double v = 21.0 * r2 * 16.0;  // box volume 2^4
        out[0] += v;
        out[1] += v * v;
      }
    });
    double n = static_cast<double>(per_chunk * static_cast<long long>(chunks));
    double mean = acc[0] / n;
    double var = std::max(acc[1] / n - mean * mean, 0.0);
    return {mean, std::sqrt(var / n), static_cast<long long>(n)};
  }

  // Adaptive 2D rule on (rho, t): the three symmetric coordinates are reduced
  // to their radial factor 4*pi*rho^4, leaving 2*84*pi int rho^4 over
  // {rho^4 + t^2 <= 1, rho, t >= 0}.
  struct Cell2 {
    double lo0, hi0, lo1, hi1, val, err;
    std::uint64_t id;
  };
  auto inside = [](double rho, double t) { return rho * rho * rho * rho + t * t <= 1.0; };
  auto integrand = [&](double rho, double t) {
    return inside(rho, t) ? 168.0 * M_PI * rho * rho * rho * rho : 0.0;
  };
  auto eval2 = [&](Cell2& c) {
    const double q = 1.0 / std::sqrt(3.0);
    double c0 = 0.5 * (c.lo0 + c.hi0), h0 = 0.5 * (c.hi0 - c.lo0);
    double c1 = 0.5 * (c.lo1 + c.hi1), h1 = 0.5 * (c.hi1 - c.lo1);
    double area = 4.0 * h0 * h1;
    double sum = 0.0;
    for (int m = 0; m < 4; ++m) {
      double x = c0 + ((m & 1) ? q : -q) * h0;
      double y = c1 + ((m & 2) ? q : -q) * h1;
      sum += integrand(x, y) * area / 4.0;
    }
    c.val = sum;
    c.err = std::fabs(sum - integrand(c0, c1) * area);
    // a cell crossed by the domain boundary needs refining even when every
    // sample node falls on one side of the curve
    bool in00 = inside(c.lo0, c.lo1), in01 = inside(c.lo0, c.hi1), in10 = inside(c.hi0, c.lo1),
         in11 = inside(c.hi0, c.hi1);
    if (!(in00 == in01 && in01 == in10 && in10 == in11))
      c.err = std::max(c.err, 168.0 * M_PI * std::pow(c.hi0, 4.0) * area);
  };
  std::priority_queue<Cell2, std::vector<Cell2>,
                      decltype([](const Cell2& a, const Cell2& b) {
                        if (a.err != b.err) return a.err < b.err;
                        return a.id > b.id;
                      })>
      pq;
  std::uint64_t id = 0;
  Cell2 root{0, 1, 0, 1, 0, 0, id++};
  eval2(root);
  pq.push(root);
  long long evals = 5;
  while (evals + 10 <= static_cast<long long>(spec.budget)) {
    Cell2 top = pq.top();
    if (top.err == 0.0) break;
    pq.pop();
    bool split0 = (top.hi0 - top.lo0) >= (top.hi1 - top.lo1);
    Cell2 a = top, b = top;
    if (split0) {
      double mid = 0.5 * (top.lo0 + top.hi0);
      a.hi0 = mid;
      b.lo0 = mid;
    } else {
      double mid = 0.5 * (top.lo1 + top.hi1);
      a.hi1 = mid;
      b.lo1 = mid;
    }
    a.id = id++;
    b.id = id++;
    eval2(a);
    eval2(b);
    evals += 10;
    pq.push(a);
    pq.push(b);
  }
  double total = 0.0, err = 0.0;
  while (!pq.empty()) {
    total += pq.top().val;
    err += pq.top().err;
    pq.pop();
  }
  return {total, err, evals};
}

IntegralEstimate flux(const PlanePoint& z, double eps, const QuadratureSpec& spec) {
  double z1 = norm(z);
  if (z1 == 0.0) throw DegeneratePoint("flux at the characteristic point");
  if (eps <= 0) throw std::invalid_argument("flux: eps must be positive");
  // Second-order volume integrand grouped as in the d^4 identities.
  auto h = [&](const Vec4& y) {
    RTerms r = r_terms(y, z1);
    double t1d4 = grad_d4_axis(y, z1)[0];
    return (r.r21 + r.r22 + r.r23 + 3.0 * t1d4) / norm(y);
  };
  int k = slab_resolution(spec.budget);
  double scale = -0.75 / (gamma_normalizer() * std::pow(eps, 7.0));
  double fine = scale * slab_integrate(z1, eps, k, h, true);
  double coarse = scale * slab_integrate(z1, eps, k / 2, h, true);
  return {fine, std::fabs(fine - coarse), 4LL * k * k * k * k};
}

namespace {

struct Term {
  double sign;
  std::function<double(const Vec4&)> f;
};

double residual_from_terms(const std::vector<Term>& terms, const Vec4& center, double radius,
                           const QuadratureSpec& spec) {
  MultiIntegrand m;
  m.components = terms.size();
  m.support_center = center;
  m.support_radius = radius;
  m.eval = [&terms](const Vec4& y, double* out) {
    for (std::size_t k = 0; k < terms.size(); ++k) out[k] = terms[k].f(y);
  };
  auto est = integrate_multi(m, Weight::Lebesgue, {Singularity{{0, 0, 0, 0}, 0.0}}, spec);
  double sum = 0.0, largest = 0.0;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    sum += terms[k].sign * est[k].value;
    largest = std::max(largest, std::fabs(est[k].value));
  }
  return std::fabs(sum) / std::max(largest, 1e-30);
}

}  // namespace

double weak_identity_residual(WeakIdentity id, const ScalarField& f, const ScalarField& g,
                              const PlanePoint& z, const QuadratureSpec& spec) {
  if (f.support_radius <= 0 || g.support_radius <= 0)
    throw std::invalid_argument("weak_identity_residual: fields must have compact support");
  // covering ball of the two supports
  Vec4 mid = 0.5 * (f.support_center + g.support_center);
  double radius = 0.5 * norm(f.support_center - g.support_center) +
                  std::max(f.support_radius, g.support_radius);
  double z1 = z[0];

  auto Z = [](int i, const ScalarField& u, const Vec4& y) { return apply_Z(i, u, y); };
  auto Z4 = [&](const ScalarField& u, const Vec4& y) { return apply_Z4_shifted(u, y, {z1, 0, 0, 0}); };
  auto wtilde = [&](const Vec4& y) { return (norm2(y) - y[0] * z1) / (2.0 * norm(y)); };

  std::vector<Term> terms;
  switch (id) {
    case WeakIdentity::AdjointZ1:
      terms = {{1, [&](const Vec4& y) { return Z(1, f, y) * g.value(y); }},
               {1, [&](const Vec4& y) { return f.value(y) * Z(1, g, y); }},
               {1, [&](const Vec4& y) { return 3.0 * f.value(y) * g.value(y) / norm(y); }}};
      break;
    case WeakIdentity::AdjointZ2:
    case WeakIdentity::AdjointZ3: {
      int i = id == WeakIdentity::AdjointZ2 ? 2 : 3;
      terms = {{1, [&, i](const Vec4& y) { return Z(i, f, y) * g.value(y); }},
               {1, [&, i](const Vec4& y) { return f.value(y) * Z(i, g, y); }}};
      break;
    }
    case WeakIdentity::AdjointZ4:
      terms = {{1, [&](const Vec4& y) { return Z4(f, y) * g.value(y); }},
               {1, [&](const Vec4& y) { return f.value(y) * Z4(g, y); }},
               {1, [&](const Vec4& y) {
                  double n = norm(y);
                  return z1 * y[2] / (n * n * n) * f.value(y) * g.value(y);
                }}};
      break;
    case WeakIdentity::RewriteDirect:
      terms = {{1, [&](const Vec4& y) { return Z4(f, y) * g.value(y); }},
               {-1, [&](const Vec4& y) { return y[2] * z1 / norm2(y) * f.value(y) * Z(1, g, y); }},
               {1.5, [&](const Vec4& y) { return y[1] * z1 / norm2(y) * f.value(y) * Z(2, g, y); }},
               {-1.5, [&](const Vec4& y) { return y[3] * z1 / norm2(y) * f.value(y) * Z(3, g, y); }},
               {1, [&](const Vec4& y) {
                  double n = norm(y);
                  return y[2] * z1 / (n * n * n) * f.value(y) * g.value(y);
                }},
               {1, [&](const Vec4& y) { return wtilde(y) * Z(3, f, y) * Z(2, g, y); }},
               {-1, [&](const Vec4& y) { return wtilde(y) * Z(2, f, y) * Z(3, g, y); }}};
      break;
    case WeakIdentity::RewriteAdjoint:
      terms = {{1, [&](const Vec4& y) {
                  double n = norm(y);
                  return (-Z4(f, y) - z1 * y[2] / (n * n * n) * f.value(y)) * g.value(y);
                }},
               {1, [&](const Vec4& y) { return y[2] * z1 / norm2(y) * f.value(y) * Z(1, g, y); }},
               {-1.5, [&](const Vec4& y) { return y[1] * z1 / norm2(y) * f.value(y) * Z(2, g, y); }},
               {1.5, [&](const Vec4& y) { return y[3] * z1 / norm2(y) * f.value(y) * Z(3, g, y); }},
               {-1, [&](const Vec4& y) { return wtilde(y) * Z(3, f, y) * Z(2, g, y); }},
               {1, [&](const Vec4& y) { return wtilde(y) * Z(2, f, y) * Z(3, g, y); }}};
      break;
  }
  return residual_from_terms(terms, mid, radius, spec);
}

namespace reference {

namespace {

// Midpoint sweep of the slab domain {d((z1,0,0,0), .) <= r}.
double slab_midpoint(double z1, double r, int n, const std::function<double(const Vec4&)>& h) {
  double sum = 0.0;
  for (int ir = 0; ir < 2 * n; ++ir) {
    double rho = (ir + 0.5) / (2 * n) * r;
    double wr = r / (2 * n);
    double s = rho * rho;
    double W = slab_halfwidth(s, z1, r);
    if (W <= 0) continue;
    for (int it = 0; it < n; ++it) {
      double cth = -1.0 + 2.0 * (it + 0.5) / n;
      double sth = std::sqrt(std::max(1.0 - cth * cth, 0.0));
      for (int ip = 0; ip < 2 * n; ++ip) {
        double phi = 2.0 * M_PI * (ip + 0.5) / (2 * n);
        double v1 = rho * cth, v2 = rho * sth * std::cos(phi), v4 = rho * sth * std::sin(phi);
        for (int i3 = 0; i3 < n; ++i3) {
          double w3 = -W + 2.0 * W * (i3 + 0.5) / n;
          Vec4 y{z1 + v1, v2, w3, v4};
          sum += h(y) * rho * rho * wr * (2.0 / n) * (2.0 * M_PI / (2 * n)) * (2.0 * W / n);
        }
      }
    }
  }
  return sum;
}

}  // namespace

double mu_ball(const PlanePoint& c, double r, int resolution) {
  double c1 = norm(c);
  return slab_midpoint(c1, r, resolution, [](const Vec4& y) { return norm(y); });
}

double flux(const PlanePoint& z, double eps, int resolution) {
  double z1 = norm(z);
  if (z1 == 0.0) throw DegeneratePoint("flux at the characteristic point");
  auto h = [&](const Vec4& y) {
    RTerms r = r_terms(y, z1);
    double t1d4 = grad_d4_axis(y, z1)[0];
    return (r.r21 + r.r22 + r.r23 + 3.0 * t1d4) / norm(y);
  };
  return -0.75 / (gamma_normalizer() * std::pow(eps, 7.0)) * slab_midpoint(z1, eps, resolution, h);
}

}  // namespace reference

double ball_growth_slope(const PlanePoint& c, const std::vector<double>& radii,
                         const QuadratureSpec& spec) {
  if (radii.size() < 4)
    throw std::invalid_argument("ball_growth_slope: need at least 4 radii for a fit");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double r : radii) {
    double lx = std::log(r);
    double ly = std::log(mu_ball(c, r, spec).value);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double n = static_cast<double>(radii.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace heis
