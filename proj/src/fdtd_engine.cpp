#include <algorithm>
#include <barrier>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "nwem/constants.hpp"
#include "nwem/fdtd.hpp"

namespace nwem::fdtd {

namespace {

constexpr int kEnergyInterval = 10;
constexpr double kInstabilityFactor = 1e12;

// CPML auxiliary fields for the two field components differentiated along
// `axis` inside one absorbing slab. Arrays cover the slab layers times the
// full extent of the other two axes.
struct Slab {
    int axis = 0;
    int lo = 0, hi = 0;  // node range [lo, hi) along axis
    std::vector<double> be, ce, bh, ch;  // per layer
    std::array<std::vector<double>, 2> psi_e, psi_h;  // [component c1, c2]
    std::size_t stride_i = 0, stride_j = 0;  // local strides
};

// One running-DFT sample set: E at one index, H averaged over two.
struct DftSet {
    int e_comp = 0, h_comp = 0;
    std::vector<std::size_t> e_idx, h_idx0, h_idx1;
    std::vector<std::vector<cplx>>* e_acc = nullptr;
    std::vector<std::vector<cplx>>* h_acc = nullptr;
};

struct PartitionRange {
    int begin, end;
};

class Engine {
public:
    explicit Engine(const FdtdDomain& d) : d_(d), g_(d.grid), pulse_(d.config.source) {
        const std::size_t n = g_.size();
        for (auto& f : e_) f.assign(n, 0.0);
        for (auto& f : h_) f.assign(n, 0.0);
        s_ = d.config.courant_factor;
        for (int c = 0; c < 3; ++c) {
            ce_[c].resize(n);
            for (std::size_t i = 0; i < n; ++i) ce_[c][i] = s_ / d.eps[c][i];
        }
        stride_ = {std::size_t(g_.ny + 1) * (g_.nz + 1), std::size_t(g_.nz + 1), 1};
        build_slabs();
        build_monitors();
        build_source();
        build_probes();
    }

    RunResult execute() {
        const int workers = std::max(1, std::min(d_.config.workers, g_.nx / 4));
        if (workers == 1) {
            worker_loop(0, 1, nullptr);
        } else {
            std::barrier sync(workers);
            std::vector<std::jthread> team;
            for (int t = 1; t < workers; ++t)
                team.emplace_back([this, t, workers, &sync] { worker_loop(t, workers, &sync); });
            worker_loop(0, workers, &sync);
        }
        if (unstable_) {
            std::ostringstream os;
            os << "FDTD instability at step " << result_.steps << ": field magnitude " << unstable_value_
               << " exceeds " << kInstabilityFactor << " x source scale " << source_scale_
               << " (courant factor " << d_.config.courant_factor << ")";
            throw InstabilityError(os.str());
        }
        finish();
        return std::move(result_);
    }

private:
    const FdtdDomain& d_;
    const Grid& g_;
    Pulse pulse_;
    double s_ = 0.0;
    std::array<std::vector<double>, 3> e_, h_, ce_;
    std::array<std::size_t, 3> stride_{};
    std::vector<Slab> slabs_;
    std::vector<DftSet> dft_;
    std::vector<double> omega_;
    std::vector<std::size_t> probe_idx_[3];
    std::vector<double> energy_part_, max_part_;
    double source_scale_ = 0.0;
    double peak_energy_ = 0.0;
    bool unstable_ = false;
    double unstable_value_ = 0.0;
    RunResult result_;

    void build_slabs() {
        const int n = d_.config.pml_thickness;
        const double dt = d_.dt;
        for (int a = 0; a < 3; ++a) {
            for (int side = 0; side < 2; ++side) {
                Slab s;
                s.axis = a;
                s.lo = side == 0 ? 0 : g_.n(a) - n;
                s.hi = side == 0 ? n + 1 : g_.n(a) + 1;
                const int layers = s.hi - s.lo;
                for (int l = 0; l < layers; ++l) {
                    const double se = d_.pml_profile_e[a][s.lo + l];
                    const double sh = d_.pml_profile_h[a][s.lo + l];
                    s.be.push_back(std::exp(-se * dt / constants::eps0));
                    s.bh.push_back(std::exp(-sh * dt / constants::eps0));
                    s.ce.push_back(s.be.back() - 1.0);
                    s.ch.push_back(s.bh.back() - 1.0);
                }
                std::array<int, 3> ext{g_.nx + 1, g_.ny + 1, g_.nz + 1};
                ext[a] = layers;
                s.stride_i = std::size_t(ext[1]) * ext[2];
                s.stride_j = std::size_t(ext[2]);
                const std::size_t size = std::size_t(ext[0]) * ext[1] * ext[2];
                for (int q = 0; q < 2; ++q) {
                    s.psi_e[q].assign(size, 0.0);
                    s.psi_h[q].assign(size, 0.0);
                }
                slabs_.push_back(std::move(s));
            }
        }
    }

    std::size_t flat(int a, int ia, int u, int iu, int v, int iv) const {
        int ijk[3];
        ijk[a] = ia;
        ijk[u] = iu;
        ijk[v] = iv;
        return g_.index(ijk[0], ijk[1], ijk[2]);
    }

    void add_face(MonitorData& m, int a, int ka, int u0, int u1, int v0, int v1, double sign) {
        const int u = (a + 1) % 3, v = (a + 2) % 3;
        FaceData f;
        f.axis = a;
        f.coordinate = g_.coord(a, ka);
        f.sign = sign;
        const std::size_t nw = omega_.size();
        auto trapezoid = [&](int lo, int hi, bool half, std::vector<double>& pos, std::vector<double>& w) {
            if (half) {
                for (int i = lo; i < hi; ++i) {
                    pos.push_back(i + 0.5);
                    w.push_back(g_.dx);
                }
            } else {
                for (int i = lo; i <= hi; ++i) {
                    pos.push_back(i);
                    w.push_back(i == lo || i == hi ? 0.5 * g_.dx : g_.dx);
                }
            }
        };
        // Set a: E_u at (u half, v node), H_v averaged over a -+ 1/2.
        trapezoid(u0, u1, true, f.a.u, f.a.wu);
        trapezoid(v0, v1, false, f.a.v, f.a.wv);
        // Set b: E_v at (u node, v half), H_u averaged.
        trapezoid(u0, u1, false, f.b.u, f.b.wu);
        trapezoid(v0, v1, true, f.b.v, f.b.wv);
        for (FaceSamples* fs : {&f.a, &f.b}) {
            fs->e.assign(nw, std::vector<cplx>(fs->u.size() * fs->v.size()));
            fs->h.assign(nw, std::vector<cplx>(fs->u.size() * fs->v.size()));
        }
        m.faces.push_back(std::move(f));
        FaceData& ff = m.faces.back();
        for (int set = 0; set < 2; ++set) {
            FaceSamples& fs = set == 0 ? ff.a : ff.b;
            DftSet ds;
            ds.e_comp = set == 0 ? u : v;
            ds.h_comp = set == 0 ? v : u;
            for (double pu : fs.u)
                for (double pv : fs.v) {
                    const int iu = static_cast<int>(std::floor(pu));
                    const int iv = static_cast<int>(std::floor(pv));
                    ds.e_idx.push_back(flat(a, ka, u, iu, v, iv));
                    ds.h_idx0.push_back(flat(a, ka - 1, u, iu, v, iv));
                    ds.h_idx1.push_back(flat(a, ka, u, iu, v, iv));
                }
            // Index positions become coordinates.
            for (double& pu : fs.u) pu = g_.coord(u, pu);
            for (double& pv : fs.v) pv = g_.coord(v, pv);
            ds.e_acc = &fs.e;
            ds.h_acc = &fs.h;
            dft_.push_back(std::move(ds));
        }
    }

    void build_monitors() {
        const auto& cfg = d_.config;
        result_.wavelengths = cfg.record_wavelengths;
        for (double w : cfg.record_wavelengths) omega_.push_back(2.0 * std::numbers::pi * constants::c0 / w);
        result_.monitors.reserve(cfg.monitors.size());
        for (const auto& spec : cfg.monitors) {
            MonitorData m;
            m.name = spec.name;
            m.kind = spec.kind;
            m.wavelengths = cfg.record_wavelengths;
            auto node = [&](int a, double x) { return static_cast<int>(std::lround(g_.to_index(a, x))); };
            // Faces hold pointers into m; reserve so they stay put.
            m.faces.reserve(6);
            result_.monitors.push_back(std::move(m));
            MonitorData& mm = result_.monitors.back();
            if (spec.kind == MonitorKind::plane) {
                const int a = spec.axis, u = (a + 1) % 3, v = (a + 2) % 3;
                add_face(mm, a, node(a, spec.position), node(u, spec.lo[u]), node(u, spec.hi[u]), node(v, spec.lo[v]),
                         node(v, spec.hi[v]), 1.0);
            } else {
                for (int a = 0; a < 3; ++a) {
                    const int u = (a + 1) % 3, v = (a + 2) % 3;
                    for (int side = 0; side < 2; ++side) {
                        const double pos = side == 0 ? spec.lo[a] : spec.hi[a];
                        add_face(mm, a, node(a, pos), node(u, spec.lo[u]), node(u, spec.hi[u]), node(v, spec.lo[v]),
                                 node(v, spec.hi[v]), side == 0 ? -1.0 : 1.0);
                    }
                }
            }
        }
        result_.source_current.assign(omega_.size(), 0.0);
        result_.source_power.assign(omega_.size(), 0.0);
        source_e_dft_.assign(omega_.size(), 0.0);
    }

    std::vector<cplx> source_e_dft_;  // sum of weight * E over source points

    void build_source() {
        // Largest single-step field kick, the scale for the instability check.
        double max_il = 0.0;
        const double dt = d_.dt;
        const int pulse_steps = static_cast<int>(pulse_.end_time() / dt) + 1;
        for (int n = 0; n < pulse_steps; ++n)
            max_il = std::max(max_il, std::abs(pulse_.moment((n + 1) * dt) - pulse_.moment(n * dt)) / dt);
        double max_w = 0.0;
        for (const auto& sp : d_.source_points)
            max_w = std::max(max_w, std::abs(sp.weight) / d_.eps[sp.component][sp.index]);
        const double dv = g_.dx * g_.dx * g_.dx;
        source_scale_ = dt / (constants::eps0 * dv) * max_il * max_w;
    }

    void build_probes() {
        for (const auto& p : d_.config.probes) {
            for (int c = 0; c < 3; ++c) {
                const Vec3 off = e_offset(c);
                int ijk[3];
                for (int a = 0; a < 3; ++a) ijk[a] = static_cast<int>(std::lround(g_.to_index(a, p[a]) - off[a]));
                probe_idx_[c].push_back(g_.index(ijk[0], ijk[1], ijk[2]));
            }
        }
        result_.probe_traces.resize(d_.config.probes.size());
    }

    // Field updates over the intersection of [r.begin, r.end) with [0, nx)
    // (H) or [1, nx) (E). Boundary E components stay zero (PEC behind the PML).
    void update_h(PartitionRange r) {
        const std::size_t sx = stride_[0], sy = stride_[1];
        double* hx = h_[0].data();
        double* hy = h_[1].data();
        double* hz = h_[2].data();
        const double* ex = e_[0].data();
        const double* ey = e_[1].data();
        const double* ez = e_[2].data();
        const double s = s_;
        for (int i = r.begin; i < std::min(r.end, g_.nx); ++i)
            for (int j = 0; j < g_.ny; ++j) {
                const std::size_t base = g_.index(i, j, 0);
                for (int k = 0; k < g_.nz; ++k) {
                    const std::size_t id = base + k;
                    hx[id] -= s * ((ez[id + sy] - ez[id]) - (ey[id + 1] - ey[id]));
                    hy[id] -= s * ((ex[id + 1] - ex[id]) - (ez[id + sx] - ez[id]));
                    hz[id] -= s * ((ey[id + sx] - ey[id]) - (ex[id + sy] - ex[id]));
                }
            }
    }

    void update_e(PartitionRange r) {
        const std::size_t sx = stride_[0], sy = stride_[1];
        double* ex = e_[0].data();
        double* ey = e_[1].data();
        double* ez = e_[2].data();
        const double* hx = h_[0].data();
        const double* hy = h_[1].data();
        const double* hz = h_[2].data();
        const double* cx = ce_[0].data();
        const double* cy = ce_[1].data();
        const double* cz = ce_[2].data();
        for (int i = std::max(r.begin, 1); i < std::min(r.end, g_.nx); ++i)
            for (int j = 1; j < g_.ny; ++j) {
                const std::size_t base = g_.index(i, j, 0);
                for (int k = 1; k < g_.nz; ++k) {
                    const std::size_t id = base + k;
                    ex[id] += cx[id] * ((hz[id] - hz[id - sy]) - (hy[id] - hy[id - 1]));
                    ey[id] += cy[id] * ((hx[id] - hx[id - 1]) - (hz[id] - hz[id - sx]));
                    ez[id] += cz[id] * ((hy[id] - hy[id - sx]) - (hx[id] - hx[id - sy]));
                }
            }
    }

    // CPML corrections. For a slab along axis a with (a, c1, c2) cyclic,
    // curl_{c1} F holds -d_a F_{c2} and curl_{c2} F holds +d_a F_{c1}.
    void pml_e(Slab& s, PartitionRange r) {
        const int a = s.axis;
        const int c1 = (a + 1) % 3, c2 = (a + 2) % 3;
        const std::size_t st = stride_[a];
        int lo[3] = {std::max(r.begin, 1), 1, 1};
        int hi[3] = {std::min(r.end, g_.nx), g_.ny, g_.nz};
        lo[a] = std::max(lo[a], std::max(s.lo, 1));
        hi[a] = std::min(hi[a], std::min(s.hi, g_.n(a)));
        double* e1 = e_[c1].data();
        double* e2 = e_[c2].data();
        const double* h1 = h_[c1].data();
        const double* h2 = h_[c2].data();
        const double* k1 = ce_[c1].data();
        const double* k2 = ce_[c2].data();
        double* p1 = s.psi_e[0].data();
        double* p2 = s.psi_e[1].data();
        for (int i = lo[0]; i < hi[0]; ++i)
            for (int j = lo[1]; j < hi[1]; ++j)
                for (int k = lo[2]; k < hi[2]; ++k) {
                    int ijk[3] = {i, j, k};
                    const int layer = ijk[a] - s.lo;
                    ijk[a] = layer;
                    const std::size_t loc = ijk[0] * s.stride_i + ijk[1] * s.stride_j + ijk[2];
                    const std::size_t id = g_.index(i, j, k);
                    const double b = s.be[layer], c = s.ce[layer];
                    p1[loc] = b * p1[loc] + c * (h2[id] - h2[id - st]);
                    e1[id] -= k1[id] * p1[loc];
                    p2[loc] = b * p2[loc] + c * (h1[id] - h1[id - st]);
                    e2[id] += k2[id] * p2[loc];
                }
    }

    void pml_h(Slab& s, PartitionRange r) {
        const int a = s.axis;
        const int c1 = (a + 1) % 3, c2 = (a + 2) % 3;
        const std::size_t st = stride_[a];
        int lo[3] = {r.begin, 0, 0};
        int hi[3] = {std::min(r.end, g_.nx), g_.ny, g_.nz};
        lo[a] = std::max(lo[a], s.lo);
        hi[a] = std::min(hi[a], std::min(s.hi, g_.n(a)));
        double* h1 = h_[c1].data();
        double* h2 = h_[c2].data();
        const double* e1 = e_[c1].data();
        const double* e2 = e_[c2].data();
        double* p1 = s.psi_h[0].data();
        double* p2 = s.psi_h[1].data();
        const double sc = s_;
        for (int i = lo[0]; i < hi[0]; ++i)
            for (int j = lo[1]; j < hi[1]; ++j)
                for (int k = lo[2]; k < hi[2]; ++k) {
                    int ijk[3] = {i, j, k};
                    const int layer = ijk[a] - s.lo;
                    ijk[a] = layer;
                    const std::size_t loc = ijk[0] * s.stride_i + ijk[1] * s.stride_j + ijk[2];
                    const std::size_t id = g_.index(i, j, k);
                    const double b = s.bh[layer], c = s.ch[layer];
                    p1[loc] = b * p1[loc] + c * (e2[id + st] - e2[id]);
                    h1[id] += sc * p1[loc];
                    p2[loc] = b * p2[loc] + c * (e1[id + st] - e1[id]);
                    h2[id] -= sc * p2[loc];
                }
    }

    void accumulate(bool e_phase, const std::vector<cplx>& phase, int t, int workers) {
        for (auto& ds : dft_) {
            const std::size_t n = ds.e_idx.size();
            const std::size_t b = n * t / workers, e = n * (t + 1) / workers;
            if (e_phase) {
                const double* f = e_[ds.e_comp].data();
                for (std::size_t w = 0; w < phase.size(); ++w) {
                    cplx* acc = (*ds.e_acc)[w].data();
                    const cplx ph = phase[w];
                    for (std::size_t p = b; p < e; ++p) acc[p] += f[ds.e_idx[p]] * ph;
                }
            } else {
                // H' = eta0 H; store H in A/m.
                const double* f = h_[ds.h_comp].data();
                for (std::size_t w = 0; w < phase.size(); ++w) {
                    cplx* acc = (*ds.h_acc)[w].data();
                    const cplx ph = phase[w] * (0.5 / constants::eta0);
                    for (std::size_t p = b; p < e; ++p) acc[p] += (f[ds.h_idx0[p]] + f[ds.h_idx1[p]]) * ph;
                }
            }
        }
    }

    void energy_partial(PartitionRange r) {
        for (int i = r.begin; i < r.end; ++i) {
            double u = 0.0, mx = 0.0;
            for (int j = 0; j <= g_.ny; ++j) {
                const std::size_t base = g_.index(i, j, 0);
                for (int k = 0; k <= g_.nz; ++k) {
                    const std::size_t id = base + k;
                    for (int c = 0; c < 3; ++c) {
                        const double ev = e_[c][id], hv = h_[c][id];
                        u += d_.eps[c][id] * ev * ev + hv * hv;
                        mx = std::max({mx, std::abs(ev), std::abs(hv)});
                    }
                }
            }
            energy_part_[i] = u;
            max_part_[i] = std::isfinite(u) ? mx : std::numeric_limits<double>::infinity();
        }
    }

    void worker_loop(int t, int workers, std::barrier<>* sync) {
        const int nplanes = g_.nx + 1;
        PartitionRange r{nplanes * t / workers, nplanes * (t + 1) / workers};
        if (t == 0) {
            energy_part_.assign(nplanes, 0.0);
            max_part_.assign(nplanes, 0.0);
        }
        auto wait = [&] {
            if (sync) sync->arrive_and_wait();
        };
        wait();
        const double dt = d_.dt;
        const double dv = g_.dx * g_.dx * g_.dx;
        const auto& cfg = d_.config;
        const int pulse_steps = static_cast<int>(std::ceil(pulse_.end_time() / dt));
        std::vector<cplx> ph_h(omega_.size()), ph_e(omega_.size());
        double peak = 0.0;
        int n = 0;
        for (; n < cfg.time_steps; ++n) {
            const double th = (n + 0.5) * dt, te = (n + 1.0) * dt;
            for (std::size_t w = 0; w < omega_.size(); ++w) {
                ph_h[w] = std::polar(dt, omega_[w] * th);
                ph_e[w] = std::polar(dt, omega_[w] * te);
            }
            update_h(r);
            for (auto& s : slabs_) pml_h(s, r);
            wait();
            accumulate(false, ph_h, t, workers);
            const double il = (pulse_.moment(te) - pulse_.moment(n * dt)) / dt;
            if (t == 0)
                for (std::size_t w = 0; w < omega_.size(); ++w) result_.source_current[w] += il * ph_h[w];
            update_e(r);
            for (auto& s : slabs_) pml_e(s, r);
            for (const auto& sp : d_.source_points) {
                const int i = static_cast<int>(sp.index / stride_[0]);
                if (i < r.begin || i >= r.end) continue;
                e_[sp.component][sp.index] -=
                    dt / (constants::eps0 * d_.eps[sp.component][sp.index] * dv) * sp.weight * il;
            }
            wait();
            accumulate(true, ph_e, t, workers);
            if (t == 0) {
                for (const auto& sp : d_.source_points)
                    for (std::size_t w = 0; w < omega_.size(); ++w)
                        source_e_dft_[w] += sp.weight * e_[sp.component][sp.index] * ph_e[w];
                for (std::size_t p = 0; p < result_.probe_traces.size(); ++p)
                    result_.probe_traces[p].push_back(
                        {e_[0][probe_idx_[0][p]], e_[1][probe_idx_[1][p]], e_[2][probe_idx_[2][p]]});
            }
            if ((n + 1) % kEnergyInterval == 0) {
                energy_partial(r);
                wait();
                double u = 0.0, mx = 0.0;
                for (int i = 0; i < nplanes; ++i) {
                    u += energy_part_[i];
                    mx = std::max(mx, max_part_[i]);
                }
                u *= 0.5 * constants::eps0 * dv;
                if (!(mx <= kInstabilityFactor * source_scale_)) {
                    if (t == 0) {
                        unstable_ = true;
                        unstable_value_ = mx;
                        result_.steps = n + 1;
                    }
                    wait();
                    return;
                }
                peak = std::max(peak, u);
                if (t == 0) {
                    peak_energy_ = peak;
                    result_.energy_trace.push_back(u);
                }
                if (n + 1 >= pulse_steps && u <= cfg.energy_decay * peak) {
                    ++n;
                    break;
                }
            }
        }
        if (t == 0) result_.steps = n;
    }

    void finish() {
        const double dt = d_.dt;
        result_.dt = dt;
        const double peak = peak_energy_;
        const double last = result_.energy_trace.empty() ? 0.0 : result_.energy_trace.back();
        result_.final_energy_ratio = peak > 0.0 ? last / peak : 0.0;
        result_.converged = peak > 0.0 && result_.final_energy_ratio <= d_.config.energy_decay;
        for (std::size_t w = 0; w < omega_.size(); ++w) {
            // E is sampled at integer steps, J at half steps; the half-step
            // average of E that does work on J carries cos(omega dt / 2).
            const double c = std::cos(0.5 * omega_[w] * dt);
            result_.source_power[w] = -0.5 * std::real(c * source_e_dft_[w] * std::conj(result_.source_current[w]));
        }
    }
};

}  // namespace

RunResult run(const FdtdDomain& domain) {
    Engine engine(domain);
    return engine.execute();
}

RunResult simulate(const SimulationConfig& config) { return run(build_domain(config)); }

const MonitorData& RunResult::monitor(const std::string& name) const {
    for (const auto& m : monitors)
        if (m.name == name) return m;
    throw std::invalid_argument("no monitor named \"" + name + "\"");
}

std::size_t RunResult::wavelength_index(double wavelength) const {
    for (std::size_t i = 0; i < wavelengths.size(); ++i)
        if (std::abs(wavelengths[i] - wavelength) <= 1e-9 * wavelength) return i;
    std::ostringstream os;
    os << "wavelength " << wavelength * 1e9 << " nm was not recorded";
    throw std::invalid_argument(os.str());
}

double face_flux(const FaceData& f, std::size_t w) {
    auto sum = [w](const FaceSamples& s) {
        double acc = 0.0;
        const std::size_t nv = s.v.size();
        for (std::size_t iu = 0; iu < s.u.size(); ++iu)
            for (std::size_t iv = 0; iv < nv; ++iv) {
                const std::size_t p = iu * nv + iv;
                acc += s.wu[iu] * s.wv[iv] * std::real(s.e[w][p] * std::conj(s.h[w][p]));
            }
        return acc;
    };
    return f.sign * 0.5 * (sum(f.a) - sum(f.b));
}

double flux(const MonitorData& m, double wavelength) {
    std::size_t w = m.wavelengths.size();
    for (std::size_t i = 0; i < m.wavelengths.size(); ++i)
        if (std::abs(m.wavelengths[i] - wavelength) <= 1e-9 * wavelength) w = i;
    if (w == m.wavelengths.size()) {
        std::ostringstream os;
        os << "flux: wavelength " << wavelength * 1e9 << " nm was not recorded by monitor " << m.name;
        throw std::invalid_argument(os.str());
    }
    double total = 0.0;
    for (const auto& f : m.faces) total += face_flux(f, w);
    return total;
}

double analytic_dipole_power(cplx il, double wavelength, double index) {
    const double k0 = 2.0 * std::numbers::pi / wavelength;
    return constants::eta0 * index * k0 * k0 * std::norm(il) / (12.0 * std::numbers::pi);
}

namespace {

std::mutex g_reference_mutex;
std::map<std::string, std::vector<double>> g_reference_cache;

}  // namespace

void clear_reference_cache() {
    std::lock_guard lock(g_reference_mutex);
    g_reference_cache.clear();
}

std::vector<double> bulk_reference_power(const SimulationConfig& config, double medium_index) {
    if (!(medium_index >= 1.0)) throw std::invalid_argument("bulk reference: medium index must be >= 1");
    SimulationConfig ref;
    ref.cell_size = config.cell_size;
    ref.courant_factor = config.courant_factor;
    ref.enforce_courant_limit = config.enforce_courant_limit;
    ref.pml_thickness = config.pml_thickness;
    ref.time_steps = config.time_steps;
    ref.energy_decay = config.energy_decay;
    ref.record_wavelengths = config.record_wavelengths;
    ref.memory_budget_mb = config.memory_budget_mb;
    ref.workers = config.workers;
    ref.geometry.wire_height = 0.0;
    ref.geometry.substrate = false;
    ref.geometry.background_index = medium_index;
    ref.source = config.source;

    // Same sub-cell offset of the dipole as in the parent grid.
    const double dx = config.cell_size;
    const int half = static_cast<int>(std::lround(0.5 * config.reference_extent / dx));
    ref.domain_extent = {2.0 * half * dx, 2.0 * half * dx, 2.0 * half * dx};
    const double parent_z0 = config.domain_z_min;
    const double zi = (config.source.position.z - parent_z0) / dx;
    const double frac_z = zi - std::floor(zi + 1e-9);
    ref.source.position.z = (half + frac_z) * dx;
    ref.domain_z_min = 0.0;
    // x and y: both grids put a node on the axis, so positions carry over.
    for (int a = 0; a < 2; ++a) {
        const double idx = config.source.position[a] / dx;
        ref.source.position[a] = (idx - std::floor(idx + 1e-9)) * dx;
    }

    std::ostringstream key;
    key.precision(17);
    key << medium_index << '|' << config_to_json(ref);
    {
        std::lock_guard lock(g_reference_mutex);
        auto it = g_reference_cache.find(key.str());
        if (it != g_reference_cache.end()) return it->second;
    }
    RunResult r = simulate(ref);
    if (!r.converged) throw NumericalError("bulk reference run did not converge");
    std::lock_guard lock(g_reference_mutex);
    g_reference_cache[key.str()] = r.source_power;
    return r.source_power;
}

}  // namespace nwem::fdtd
