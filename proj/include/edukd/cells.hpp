#pragma once

// Recurrent cells (vanilla, GRU, LSTM) and sequence encoders. Each cell
// step is a single fused tape op with a hand-derived backward closure;
// the finite-difference suite checks these derivatives.
//
// Gate order: vanilla [act]; GRU [update, reset, candidate];
// LSTM [input, forget, output, candidate].

#include <stdexcept>
#include <string>
#include <vector>

#include "edukd/rng.hpp"
#include "edukd/tensor.hpp"

namespace edukd {

enum class CellKind { vanilla, gru, lstm };

inline std::size_t gate_count(CellKind k) {
  switch (k) {
    case CellKind::vanilla: return 1;
    case CellKind::gru: return 3;
    case CellKind::lstm: return 4;
  }
  throw std::logic_error("gate_count: bad kind");
}

inline const char* cell_name(CellKind k) {
  switch (k) {
    case CellKind::vanilla: return "rnn";
    case CellKind::gru: return "gru";
    case CellKind::lstm: return "lstm";
  }
  throw std::logic_error("cell_name: bad kind");
}

inline CellKind cell_from_name(const std::string& s) {
  if (s == "rnn" || s == "vanilla") return CellKind::vanilla;
  if (s == "gru") return CellKind::gru;
  if (s == "lstm") return CellKind::lstm;
  throw std::invalid_argument("unknown cell kind: " + s);
}

inline double xavier_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

struct CellParams {
  CellKind kind = CellKind::gru;
  std::size_t input_size = 0;   // k
  std::size_t hidden_size = 0;  // r
  std::vector<Tensor> w_x;      // per gate, r x k
  std::vector<Tensor> w_h;      // per gate, r x r
  std::vector<Tensor> b;        // per gate, r x 1

  // Xavier-uniform weights, zero biases. Draw order is fixed per gate:
  // w_x then w_h, so identical seeds give identical parameters.
  static CellParams init(CellKind kind, std::size_t k, std::size_t r, Rng& rng) {
    CellParams p;
    p.kind = kind;
    p.input_size = k;
    p.hidden_size = r;
    std::size_t gates = gate_count(kind);
    double lx = xavier_limit(k, r);
    double lh = xavier_limit(r, r);
    for (std::size_t g = 0; g < gates; ++g) {
      std::vector<double> wx(r * k), wh(r * r);
      for (auto& v : wx) v = rng.uniform(-lx, lx);
      for (auto& v : wh) v = rng.uniform(-lh, lh);
      p.w_x.push_back(Tensor::from_data(r, k, std::move(wx), true));
      p.w_h.push_back(Tensor::from_data(r, r, std::move(wh), true));
      p.b.push_back(Tensor::zeros(r, 1, true));
    }
    return p;
  }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    for (std::size_t g = 0; g < w_x.size(); ++g) {
      out.push_back(w_x[g]);
      out.push_back(w_h[g]);
      out.push_back(b[g]);
    }
    return out;
  }

  CellParams clone() const {
    CellParams p;
    p.kind = kind;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    for (const auto& t : w_x) p.w_x.push_back(t.clone());
    for (const auto& t : w_h) p.w_h.push_back(t.clone());
    for (const auto& t : b) p.b.push_back(t.clone());
    return p;
  }
};

struct HiddenTrajectory {
  std::vector<Tensor> h;  // h_1..h_n
  std::vector<Tensor> c;  // lstm cell states, empty otherwise

  std::size_t length() const { return h.size(); }
  const Tensor& last() const { return h.back(); }
};

struct CellStepOut {
  Tensor h;
  Tensor c;  // defined for lstm only
};

namespace detail {

// y += M v, M is rows x cols row-major.
inline void addmv(std::vector<double>& y, const std::vector<double>& m,
                  const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += m[i * cols + j] * v[j];
    y[i] += acc;
  }
}

// y += Mᵀ v
inline void addmtv(std::vector<double>& y, const std::vector<double>& m,
                   const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double vi = v[i];
    if (vi == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) y[j] += m[i * cols + j] * vi;
  }
}

// G += u vᵀ, G is |u| x |v| row-major.
inline void add_outer(std::vector<double>& g, const std::vector<double>& u,
                      const std::vector<double>& v) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    double ui = u[i];
    if (ui == 0.0) continue;
    for (std::size_t j = 0; j < v.size(); ++j) g[i * v.size() + j] += ui * v[j];
  }
}

inline std::vector<double> gate_preact(const CellParams& p, std::size_t g,
                                       const std::vector<double>& h,
                                       const std::vector<double>& x) {
  std::vector<double> a = p.b[g].values();
  addmv(a, p.w_x[g].values(), x, p.hidden_size, p.input_size);
  addmv(a, p.w_h[g].values(), h, p.hidden_size, p.hidden_size);
  return a;
}

inline void check_cell_dims(const CellParams& p, const Tensor& h_prev, const Tensor& x) {
  if (x.rows() != p.input_size || x.cols() != 1)
    throw std::invalid_argument("cell_step: input is " + shape_str(*x.node()) + ", expected " +
                                std::to_string(p.input_size) + "x1");
  if (h_prev.rows() != p.hidden_size || h_prev.cols() != 1)
    throw std::invalid_argument("cell_step: hidden state is " + shape_str(*h_prev.node()) +
                                ", expected " + std::to_string(p.hidden_size) + "x1");
}

inline bool cell_tracked(const CellParams& p, const Tensor& h_prev, const Tensor& x) {
  if (Tape::active() == nullptr) return false;
  if (h_prev.requires_grad() || x.requires_grad()) return true;
  for (const auto& t : p.w_x)
    if (t.requires_grad()) return true;
  return false;
}

}  // namespace detail

inline CellStepOut vanilla_step(const CellParams& p, const Tensor& h_prev, const Tensor& x) {
  std::size_t r = p.hidden_size;
  auto a = detail::gate_preact(p, 0, h_prev.values(), x.values());
  std::vector<double> h(r);
  for (std::size_t i = 0; i < r; ++i) h[i] = std::tanh(a[i]);
  bool tracked = detail::cell_tracked(p, h_prev, x);
  Tensor out = Tensor::from_data(r, 1, std::move(h), tracked);
  if (tracked) {
    auto wx = p.w_x[0].node(), wh = p.w_h[0].node(), b = p.b[0].node();
    auto hp = h_prev.node(), xn = x.node(), on = out.node();
    std::size_t k = p.input_size;
    Tape::active()->push([wx, wh, b, hp, xn, on, r, k] {
      if (!detail::has_grad(*on)) return;
      std::vector<double> da(r);
      for (std::size_t i = 0; i < r; ++i) da[i] = on->grad[i] * (1.0 - on->data[i] * on->data[i]);
      if (wx->requires_grad) {
        detail::ensure_grad(*wx);
        detail::ensure_grad(*wh);
        detail::ensure_grad(*b);
        detail::add_outer(wx->grad, da, xn->data);
        detail::add_outer(wh->grad, da, hp->data);
        for (std::size_t i = 0; i < r; ++i) b->grad[i] += da[i];
      }
      if (hp->requires_grad) {
        detail::ensure_grad(*hp);
        detail::addmtv(hp->grad, wh->data, da, r, r);
      }
      if (xn->requires_grad) {
        detail::ensure_grad(*xn);
        detail::addmtv(xn->grad, wx->data, da, r, k);
      }
    });
  }
  return {out, Tensor()};
}

inline CellStepOut gru_step(const CellParams& p, const Tensor& h_prev, const Tensor& x) {
  std::size_t r = p.hidden_size, k = p.input_size;
  const auto& hv = h_prev.values();
  auto az = detail::gate_preact(p, 0, hv, x.values());
  auto ar = detail::gate_preact(p, 1, hv, x.values());
  std::vector<double> z(r), rg(r), rh(r);
  for (std::size_t i = 0; i < r; ++i) {
    z[i] = sigmoid_value(az[i]);
    rg[i] = sigmoid_value(ar[i]);
    rh[i] = rg[i] * hv[i];
  }
  auto ag = detail::gate_preact(p, 2, rh, x.values());
  std::vector<double> g(r), h(r);
  for (std::size_t i = 0; i < r; ++i) {
    g[i] = std::tanh(ag[i]);
    h[i] = z[i] * hv[i] + (1.0 - z[i]) * g[i];
  }
  bool tracked = detail::cell_tracked(p, h_prev, x);
  Tensor out = Tensor::from_data(r, 1, std::move(h), tracked);
  if (tracked) {
    auto wz = p.w_x[0].node(), uz = p.w_h[0].node(), bz = p.b[0].node();
    auto wr = p.w_x[1].node(), ur = p.w_h[1].node(), br = p.b[1].node();
    auto wg = p.w_x[2].node(), ug = p.w_h[2].node(), bg = p.b[2].node();
    auto hp = h_prev.node(), xn = x.node(), on = out.node();
    Tape::active()->push([=, z = std::move(z), rg = std::move(rg), rh = std::move(rh),
                          g = std::move(g)] {
      if (!detail::has_grad(*on)) return;
      const auto& gh = on->grad;
      std::vector<double> daz(r), dar(r), dag(r), dh(r);
      for (std::size_t i = 0; i < r; ++i) {
        double dz = gh[i] * (hp->data[i] - g[i]);
        double dg = gh[i] * (1.0 - z[i]);
        daz[i] = dz * z[i] * (1.0 - z[i]);
        dag[i] = dg * (1.0 - g[i] * g[i]);
        dh[i] = gh[i] * z[i];
      }
      // through the candidate's reset-gated state
      std::vector<double> drh(r, 0.0);
      detail::addmtv(drh, ug->data, dag, r, r);
      for (std::size_t i = 0; i < r; ++i) {
        double dr = drh[i] * hp->data[i];
        dh[i] += drh[i] * rg[i];
        dar[i] = dr * rg[i] * (1.0 - rg[i]);
      }
      if (wz->requires_grad) {
        for (auto* n : {wz.get(), uz.get(), bz.get(), wr.get(), ur.get(), br.get(), wg.get(),
                        ug.get(), bg.get()})
          detail::ensure_grad(*n);
        detail::add_outer(wz->grad, daz, xn->data);
        detail::add_outer(wr->grad, dar, xn->data);
        detail::add_outer(wg->grad, dag, xn->data);
        detail::add_outer(uz->grad, daz, hp->data);
        detail::add_outer(ur->grad, dar, hp->data);
        detail::add_outer(ug->grad, dag, rh);
        for (std::size_t i = 0; i < r; ++i) {
          bz->grad[i] += daz[i];
          br->grad[i] += dar[i];
          bg->grad[i] += dag[i];
        }
      }
      if (hp->requires_grad) {
        detail::ensure_grad(*hp);
        detail::addmtv(hp->grad, uz->data, daz, r, r);
        detail::addmtv(hp->grad, ur->data, dar, r, r);
        for (std::size_t i = 0; i < r; ++i) hp->grad[i] += dh[i];
      }
      if (xn->requires_grad) {
        detail::ensure_grad(*xn);
        detail::addmtv(xn->grad, wz->data, daz, r, k);
        detail::addmtv(xn->grad, wr->data, dar, r, k);
        detail::addmtv(xn->grad, wg->data, dag, r, k);
      }
    });
  }
  return {out, Tensor()};
}

inline CellStepOut lstm_step(const CellParams& p, const Tensor& h_prev, const Tensor& x,
                             const Tensor& c_prev) {
  std::size_t r = p.hidden_size, k = p.input_size;
  const auto& hv = h_prev.values();
  const auto& cv = c_prev.values();
  auto ai = detail::gate_preact(p, 0, hv, x.values());
  auto af = detail::gate_preact(p, 1, hv, x.values());
  auto ao = detail::gate_preact(p, 2, hv, x.values());
  auto ag = detail::gate_preact(p, 3, hv, x.values());
  std::vector<double> gi(r), gf(r), go(r), gg(r), cn(r), tn(r), hn(r);
  for (std::size_t i = 0; i < r; ++i) {
    gi[i] = sigmoid_value(ai[i]);
    gf[i] = sigmoid_value(af[i]);
    go[i] = sigmoid_value(ao[i]);
    gg[i] = std::tanh(ag[i]);
    cn[i] = gf[i] * cv[i] + gi[i] * gg[i];
    tn[i] = std::tanh(cn[i]);
    hn[i] = go[i] * tn[i];
  }
  bool tracked = detail::cell_tracked(p, h_prev, x);
  Tensor hout = Tensor::from_data(r, 1, std::move(hn), tracked);
  Tensor cout = Tensor::from_data(r, 1, std::move(cn), tracked);
  if (tracked) {
    auto wi = p.w_x[0].node(), ui = p.w_h[0].node(), bi = p.b[0].node();
    auto wf = p.w_x[1].node(), uf = p.w_h[1].node(), bf = p.b[1].node();
    auto wo = p.w_x[2].node(), uo = p.w_h[2].node(), bo = p.b[2].node();
    auto wg = p.w_x[3].node(), ug = p.w_h[3].node(), bg = p.b[3].node();
    auto hp = h_prev.node(), cp = c_prev.node(), xn = x.node();
    auto hon = hout.node(), con = cout.node();
    Tape::active()->push([=, gi = std::move(gi), gf = std::move(gf), go = std::move(go),
                          gg = std::move(gg), tn = std::move(tn)] {
      bool has_h = detail::has_grad(*hon);
      bool has_c = detail::has_grad(*con);
      if (!has_h && !has_c) return;
      std::vector<double> dai(r), daf(r), dao(r), dag(r);
      for (std::size_t i = 0; i < r; ++i) {
        double gh = has_h ? hon->grad[i] : 0.0;
        double dct = has_c ? con->grad[i] : 0.0;
        dct += gh * go[i] * (1.0 - tn[i] * tn[i]);
        double dgo = gh * tn[i];
        double dgf = dct * cp->data[i];
        double dgi = dct * gg[i];
        double dgg = dct * gi[i];
        dai[i] = dgi * gi[i] * (1.0 - gi[i]);
        daf[i] = dgf * gf[i] * (1.0 - gf[i]);
        dao[i] = dgo * go[i] * (1.0 - go[i]);
        dag[i] = dgg * (1.0 - gg[i] * gg[i]);
        if (cp->requires_grad) {
          detail::ensure_grad(*cp);
          cp->grad[i] += dct * gf[i];
        }
      }
      if (wi->requires_grad) {
        for (auto* n : {wi.get(), ui.get(), bi.get(), wf.get(), uf.get(), bf.get(), wo.get(),
                        uo.get(), bo.get(), wg.get(), ug.get(), bg.get()})
          detail::ensure_grad(*n);
        detail::add_outer(wi->grad, dai, xn->data);
        detail::add_outer(wf->grad, daf, xn->data);
        detail::add_outer(wo->grad, dao, xn->data);
        detail::add_outer(wg->grad, dag, xn->data);
        detail::add_outer(ui->grad, dai, hp->data);
        detail::add_outer(uf->grad, daf, hp->data);
        detail::add_outer(uo->grad, dao, hp->data);
        detail::add_outer(ug->grad, dag, hp->data);
        for (std::size_t i = 0; i < r; ++i) {
          bi->grad[i] += dai[i];
          bf->grad[i] += daf[i];
          bo->grad[i] += dao[i];
          bg->grad[i] += dag[i];
        }
      }
      if (hp->requires_grad) {
        detail::ensure_grad(*hp);
        detail::addmtv(hp->grad, ui->data, dai, r, r);
        detail::addmtv(hp->grad, uf->data, daf, r, r);
        detail::addmtv(hp->grad, uo->data, dao, r, r);
        detail::addmtv(hp->grad, ug->data, dag, r, r);
      }
      if (xn->requires_grad) {
        detail::ensure_grad(*xn);
        detail::addmtv(xn->grad, wi->data, dai, r, k);
        detail::addmtv(xn->grad, wf->data, daf, r, k);
        detail::addmtv(xn->grad, wo->data, dao, r, k);
        detail::addmtv(xn->grad, wg->data, dag, r, k);
      }
    });
  }
  return {hout, cout};
}

// One recurrence step. c_prev is required for LSTM, ignored otherwise.
inline CellStepOut cell_step(const CellParams& p, const Tensor& h_prev, const Tensor& x,
                             const Tensor& c_prev = Tensor()) {
  detail::check_cell_dims(p, h_prev, x);
  switch (p.kind) {
    case CellKind::vanilla: return vanilla_step(p, h_prev, x);
    case CellKind::gru: return gru_step(p, h_prev, x);
    case CellKind::lstm: {
      if (!c_prev.defined())
        throw std::invalid_argument("cell_step: lstm needs a previous cell state");
      return lstm_step(p, h_prev, x, c_prev);
    }
  }
  throw std::logic_error("cell_step: bad kind");
}

// Iterated cell_step from h0 (zeros by default; LSTM cell state starts at
// zeros). Trajectory length equals the input length.
inline HiddenTrajectory encode(const CellParams& p, const std::vector<Tensor>& xs,
                               Tensor h0 = Tensor()) {
  if (xs.empty()) throw std::invalid_argument("encode: empty sequence");
  Tensor h = h0.defined() ? h0 : Tensor::zeros(p.hidden_size, 1);
  Tensor c = Tensor::zeros(p.hidden_size, 1);
  HiddenTrajectory traj;
  for (const auto& x : xs) {
    CellStepOut out = cell_step(p, h, x, c);
    h = out.h;
    traj.h.push_back(h);
    if (p.kind == CellKind::lstm) {
      c = out.c;
      traj.c.push_back(c);
    }
  }
  return traj;
}

// Forward pass over x_1..x_n plus a backward pass over x_n..x_1; returns
// the concatenation [h_n_fwd ; h_n_bwd-at-x_1] as a 2r column.
inline Tensor encode_bidirectional(const CellParams& fwd, const CellParams& bwd,
                                   const std::vector<Tensor>& xs) {
  if (fwd.kind != bwd.kind)
    throw std::invalid_argument("encode_bidirectional: cell kinds differ");
  if (fwd.hidden_size != bwd.hidden_size)
    throw std::invalid_argument("encode_bidirectional: hidden sizes differ");
  HiddenTrajectory f = encode(fwd, xs);
  std::vector<Tensor> rev(xs.rbegin(), xs.rend());
  HiddenTrajectory b = encode(bwd, rev);
  return concat(f.last(), b.last());
}

}  // namespace edukd
