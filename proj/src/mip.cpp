#include "sprmip/mip.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "sprmip/error.hpp"
#include "sprmip/io.hpp"

namespace sprmip {

// ---------------------------------------------------------------------------
// Boxes and bounds

void InputBox::validate() const {
  if (lower.size() != upper.size()) {
    throw MalformedInput("input box: lower/upper length mismatch");
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i]) {
      throw MalformedInput("input box: invalid interval at coordinate " +
                           std::to_string(i));
    }
  }
}

bool InputBox::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i) {
    if (x(i) < lower[i] - tol || x(i) > upper[i] + tol) return false;
  }
  return true;
}

InputBox InputBox::around(const Eigen::VectorXd& x, double delta, bool clamp,
                          double domain_lo, double domain_hi) {
  if (!(delta >= 0.0)) throw MalformedInput("input box: delta must be >= 0");
  InputBox box;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double lo = x(i) - delta;
    double hi = x(i) + delta;
    if (clamp) {
      lo = std::max(lo, domain_lo);
      hi = std::min(hi, domain_hi);
    }
    box.lower.push_back(lo);
    box.upper.push_back(hi);
  }
  box.validate();
  return box;
}

int BoundsTable::unstable_count() const {
  int n = 0;
  for (const auto& layer : layers) {
    for (const NeuronBounds& b : layer) n += b.unstable() ? 1 : 0;
  }
  return n;
}

std::string BoundsTable::to_csv() const {
  std::ostringstream out;
  out << "layer,neuron,lo,hi,provenance\n";
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t j = 0; j < layers[l].size(); ++j) {
      const NeuronBounds& b = layers[l][j];
      out << l << ',' << j << ',' << format_double(b.lo) << ','
          << format_double(b.hi) << ','
          << (b.source == BoundSource::kObbt ? "obbt" : "interval") << '\n';
    }
  }
  return out.str();
}

BoundsTable interval_bounds(const Mlp& mlp, const InputBox& box) {
  box.validate();
  if (box.dim() != mlp.input_dim()) {
    throw MalformedInput("interval_bounds: box dimension does not match network");
  }
  BoundsTable table;
  std::vector<double> lo(box.lower), hi(box.upper);
  for (int l = 0; l < mlp.num_hidden_layers(); ++l) {
    const Layer& layer = mlp.layer(l);
    std::vector<NeuronBounds> row(static_cast<std::size_t>(layer.rows()));
    for (int j = 0; j < layer.rows(); ++j) {
      double a = layer.bias(j);
      double b = layer.bias(j);
      for (int k = 0; k < layer.cols(); ++k) {
        const double w = layer.weights(j, k);
        if (w >= 0.0) {
          a += w * lo[k];
          b += w * hi[k];
        } else {
          a += w * hi[k];
          b += w * lo[k];
        }
      }
      row[j] = {a, b, BoundSource::kInterval};
    }
    lo.assign(static_cast<std::size_t>(layer.rows()), 0.0);
    hi.assign(static_cast<std::size_t>(layer.rows()), 0.0);
    for (int j = 0; j < layer.rows(); ++j) {
      lo[j] = std::max(row[j].lo, 0.0);
      hi[j] = std::max(row[j].hi, 0.0);
    }
    table.layers.push_back(std::move(row));
  }
  return table;
}

namespace {

void check_bounds_shape(const Mlp& mlp, const BoundsTable& bounds, int layers) {
  if (static_cast<int>(bounds.layers.size()) < layers) {
    throw MalformedInput("bounds table has fewer layers than the network");
  }
  for (int l = 0; l < layers; ++l) {
    if (static_cast<int>(bounds.layers[l].size()) != mlp.layer(l).rows()) {
      throw MalformedInput("bounds table width mismatch in layer " +
                           std::to_string(l));
    }
    for (const NeuronBounds& b : bounds.layers[l]) {
      if (!(b.lo <= b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi)) {
        throw MalformedInput("bounds table: invalid interval in layer " +
                             std::to_string(l));
      }
    }
  }
}

std::string indexed(const char* prefix, int a) {
  return std::string(prefix) + "_" + std::to_string(a);
}

std::string indexed(const char* prefix, int a, int b) {
  return std::string(prefix) + "_" + std::to_string(a) + "_" + std::to_string(b);
}

// Input columns plus the first `hidden_layers` ReLU layers. Returns the
// columns holding the last encoded layer's activations.
std::vector<int> encode_prefix(MipModel& mip, const Mlp& mlp, const InputBox& box,
                               const BoundsTable& bounds, int hidden_layers,
                               const EncodeOptions& opts) {
  NetworkLayout& layout = *mip.layout;
  for (int i = 0; i < box.dim(); ++i) {
    layout.inputs.push_back(mip.add_var(indexed("x", i), box.lower[i], box.upper[i]));
  }
  std::vector<int> prev = layout.inputs;
  for (int l = 0; l < hidden_layers; ++l) {
    const Layer& layer = mlp.layer(l);
    LayerCount count;
    count.inputs = static_cast<int>(prev.size());
    count.neurons = layer.rows();
    count.continuous = count.inputs + 2 * count.neurons;
    const std::size_t rows_before = mip.constraints.size();
    std::vector<NeuronVars> neurons;
    std::vector<int> next;
    for (int j = 0; j < layer.rows(); ++j) {
      const NeuronBounds& nb = bounds.layers[l][j];
      const bool binary = !opts.eliminate_stable || nb.unstable();
      const bool inactive = opts.eliminate_stable && nb.stably_inactive();
      const bool active = opts.eliminate_stable && nb.stably_active();
      NeuronVars nv;
      nv.plus = mip.add_var(indexed("vp", l, j), 0.0, inactive ? 0.0 : nb.m_plus());
      nv.minus = mip.add_var(indexed("vn", l, j), 0.0, active ? 0.0 : nb.m_minus());
      std::vector<LinearTerm> eq{{nv.plus, 1.0}, {nv.minus, -1.0}};
      for (int k = 0; k < layer.cols(); ++k) {
        const double w = layer.weights(j, k);
        if (w != 0.0) eq.push_back({prev[k], -w});
      }
      mip.add_constraint(indexed("eq", l, j), std::move(eq), Relation::kEqual,
                         layer.bias(j));
      if (binary) {
        nv.binary = mip.add_var(indexed("z", l, j), 0.0, 1.0, true);
        ++count.binaries;
        std::vector<LinearTerm> up{{nv.plus, 1.0}};
        if (nb.m_plus() != 0.0) up.push_back({nv.binary, -nb.m_plus()});
        mip.add_constraint(indexed("bp", l, j), std::move(up), Relation::kLessEqual, 0.0);
        std::vector<LinearTerm> down{{nv.minus, 1.0}};
        if (nb.m_minus() != 0.0) down.push_back({nv.binary, nb.m_minus()});
        mip.add_constraint(indexed("bn", l, j), std::move(down), Relation::kLessEqual,
                           nb.m_minus());
      }
      next.push_back(nv.plus);
      neurons.push_back(nv);
    }
    count.structural_rows = static_cast<int>(mip.constraints.size() - rows_before);
    mip.layer_counts.push_back(count);
    layout.hidden.push_back(std::move(neurons));
    prev = std::move(next);
  }
  return prev;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model

int MipModel::add_var(std::string name, double lo, double hi, bool binary) {
  const int col = num_vars();
  if (!var_index.emplace(name, col).second) {
    throw MalformedInput("mip: duplicate variable name " + name);
  }
  vars.push_back({std::move(name), lo, hi, binary});
  return col;
}

void MipModel::add_constraint(std::string name, std::vector<LinearTerm> terms,
                              Relation rel, double rhs) {
  constraints.push_back({std::move(name), std::move(terms), rel, rhs});
}

int MipModel::num_binaries() const {
  return static_cast<int>(std::count_if(vars.begin(), vars.end(),
                                        [](const MipVariable& v) { return v.binary; }));
}

std::vector<int> MipModel::binary_columns() const {
  std::vector<int> cols;
  for (int j = 0; j < num_vars(); ++j) {
    if (vars[j].binary) cols.push_back(j);
  }
  return cols;
}

int MipModel::column(std::string_view name) const {
  const auto it = var_index.find(name);
  if (it == var_index.end()) {
    throw MalformedInput("mip: unknown variable " + std::string(name));
  }
  return it->second;
}

LinearProgram MipModel::relaxation() const {
  LinearProgram lp;
  lp.sense = sense;
  for (const MipVariable& v : vars) {
    double lo = v.lower;
    double hi = v.upper;
    if (v.binary) {
      lo = std::max(lo, 0.0);
      hi = std::min(hi, 1.0);
    }
    lp.add_variable(lo, hi, 0.0);
  }
  for (const LinearTerm& t : objective) lp.objective[t.var] += t.coeff;
  for (const MipConstraint& c : constraints) {
    lp.add_constraint(c.terms, c.relation, c.rhs);
  }
  return lp;
}

// ---------------------------------------------------------------------------
// Encoders

BoundsTable obbt_tighten(const Mlp& mlp, const InputBox& box, const BoundsTable& seed) {
  box.validate();
  if (box.dim() != mlp.input_dim()) {
    throw MalformedInput("obbt_tighten: box dimension does not match network");
  }
  check_bounds_shape(mlp, seed, mlp.num_hidden_layers());
  BoundsTable result = seed;
  for (auto& layer : result.layers) {
    for (NeuronBounds& b : layer) b.source = BoundSource::kObbt;
  }
  for (int l = 1; l < mlp.num_hidden_layers(); ++l) {
    MipModel prefix;
    prefix.layout.emplace();
    const std::vector<int> acts =
        encode_prefix(prefix, mlp, box, result, l, EncodeOptions{});
    LinearProgram lp = prefix.relaxation();
    const Layer& layer = mlp.layer(l);
    for (int j = 0; j < layer.rows(); ++j) {
      std::fill(lp.objective.begin(), lp.objective.end(), 0.0);
      for (int k = 0; k < layer.cols(); ++k) lp.objective[acts[k]] = layer.weights(j, k);
      double extreme[2];
      for (int side = 0; side < 2; ++side) {
        lp.sense = side == 0 ? Sense::kMaximize : Sense::kMinimize;
        const LpSolution sol = solve_lp(lp);
        if (sol.status != LpStatus::kOptimal) {
          throw InternalError(std::string("obbt: relaxation is ") +
                              to_string(sol.status) + " at layer " +
                              std::to_string(l) + " neuron " + std::to_string(j));
        }
        const double v = sol.objective + layer.bias(j);
        const double pad = 1e-8 * (1.0 + std::abs(v));
        extreme[side] = side == 0 ? v + pad : v - pad;
      }
      NeuronBounds& nb = result.layers[l][j];
      const NeuronBounds& s = seed.layers[l][j];
      nb.hi = std::min(s.hi, extreme[0]);
      nb.lo = std::max(s.lo, extreme[1]);
      if (nb.lo > nb.hi) {
        const double mid = 0.5 * (nb.lo + nb.hi);
        nb.lo = nb.hi = mid;
      }
    }
  }
  return result;
}

MipModel encode_network(const Mlp& mlp, const InputBox& box,
                        const BoundsTable& bounds, const EncodeOptions& opts) {
  box.validate();
  if (box.dim() != mlp.input_dim()) {
    throw MalformedInput("encode_network: box dimension does not match network");
  }
  check_bounds_shape(mlp, bounds, mlp.num_hidden_layers());
  if (static_cast<int>(bounds.layers.size()) != mlp.num_hidden_layers()) {
    throw MalformedInput("encode_network: bounds table has extra layers");
  }
  MipModel mip;
  mip.layout.emplace();
  mip.network = std::make_shared<const Mlp>(mlp);
  const std::vector<int> acts =
      encode_prefix(mip, mlp, box, bounds, mlp.num_hidden_layers(), opts);
  const Layer& out = mlp.layers().back();
  for (int c = 0; c < out.rows(); ++c) {
    const int y = mip.add_var(indexed("y", c), -kInfinity, kInfinity);
    std::vector<LinearTerm> row{{y, 1.0}};
    for (int k = 0; k < out.cols(); ++k) {
      const double w = out.weights(c, k);
      if (w != 0.0) row.push_back({acts[k], -w});
    }
    mip.add_constraint(indexed("out", c), std::move(row), Relation::kEqual, out.bias(c));
    mip.layout->outputs.push_back(y);
  }
  return mip;
}

MipModel encode_adversarial(const Mlp& mlp, const Eigen::VectorXd& x, double delta,
                            int true_class, int target_class,
                            const AdversarialOptions& opts) {
  const int classes = mlp.output_dim();
  if (true_class < 0 || true_class >= classes || target_class < 0 ||
      target_class >= classes || true_class == target_class) {
    throw MalformedInput("encode_adversarial: need distinct classes in [0, " +
                         std::to_string(classes) + ")");
  }
  if (x.size() != mlp.input_dim()) {
    throw MalformedInput("encode_adversarial: input dimension mismatch");
  }
  const InputBox box = InputBox::around(x, delta, opts.clamp, opts.domain_lo, opts.domain_hi);
  BoundsTable bounds = interval_bounds(mlp, box);
  if (opts.bounds == BoundsMode::kObbt) bounds = obbt_tighten(mlp, box, bounds);
  MipModel mip = encode_network(mlp, box, bounds, {opts.eliminate_stable});
  mip.sense = Sense::kMaximize;
  mip.objective = {{mip.layout->outputs[target_class], 1.0},
                   {mip.layout->outputs[true_class], -1.0}};
  mip.target = AdversarialTarget{true_class, target_class};
  return mip;
}

// ---------------------------------------------------------------------------
// LP text

namespace {

void write_terms(std::ostream& out, const MipModel& mip,
                 const std::vector<LinearTerm>& terms) {
  for (const LinearTerm& t : terms) {
    out << (std::signbit(t.coeff) ? " - " : " + ") << format_double(std::abs(t.coeff))
        << ' ' << mip.vars[t.var].name;
  }
}

std::string bound_text(double v) {
  if (v == kInfinity) return "+inf";
  if (v == -kInfinity) return "-inf";
  return format_double(v);
}

}  // namespace

std::string export_lp(const MipModel& mip) {
  std::ostringstream out;
  out << "\\ sprmip model\n";
  out << (mip.sense == Sense::kMaximize ? "Maximize\n" : "Minimize\n");
  out << " obj:";
  write_terms(out, mip, mip.objective);
  out << "\nSubject To\n";
  for (const MipConstraint& c : mip.constraints) {
    out << ' ' << c.name << ':';
    write_terms(out, mip, c.terms);
    switch (c.relation) {
      case Relation::kLessEqual: out << " <= "; break;
      case Relation::kEqual: out << " = "; break;
      case Relation::kGreaterEqual: out << " >= "; break;
    }
    out << format_double(c.rhs) << '\n';
  }
  out << "Bounds\n";
  for (const MipVariable& v : mip.vars) {
    if (v.binary) continue;
    out << ' ';
    if (v.lower == -kInfinity && v.upper == kInfinity) {
      out << v.name << " free";
    } else if (v.lower == v.upper) {
      out << v.name << " = " << format_double(v.lower);
    } else if (v.upper == kInfinity) {
      out << v.name << " >= " << format_double(v.lower);
    } else {
      out << bound_text(v.lower) << " <= " << v.name << " <= " << bound_text(v.upper);
    }
    out << '\n';
  }
  out << "Binaries\n";
  for (const MipVariable& v : mip.vars) {
    if (v.binary) out << ' ' << v.name << '\n';
  }
  out << "End\n";
  return out.str();
}

void write_lp_file(const std::string& path, const MipModel& mip) {
  write_text_file(path, export_lp(mip));
}

namespace {

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_number(std::string_view s) {
  if (s == "+inf" || s == "inf" || s == "+infinity") return kInfinity;
  if (s == "-inf" || s == "-infinity") return -kInfinity;
  double v = 0.0;
  const char* begin = s.data();
  if (!s.empty() && s.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("lp: expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

struct PendingRow {
  std::string name;
  std::vector<std::pair<std::string, double>> terms;
  Relation relation = Relation::kLessEqual;
  double rhs = 0.0;
};

// "+ c name + c name ..." starting at tokens[from, to).
std::vector<std::pair<std::string, double>> parse_terms(
    const std::vector<std::string_view>& tok, std::size_t from, std::size_t to) {
  std::vector<std::pair<std::string, double>> terms;
  std::size_t i = from;
  while (i < to) {
    if (i + 3 > to) throw FormatError("lp: truncated term");
    const std::string_view sign = tok[i];
    if (sign != "+" && sign != "-") throw FormatError("lp: expected sign");
    double c = parse_number(tok[i + 1]);
    if (sign == "-") c = -c;
    terms.emplace_back(std::string(tok[i + 2]), c);
    i += 3;
  }
  return terms;
}

}  // namespace

MipModel parse_lp(std::string_view text) {
  enum class Section { kNone, kObjective, kRows, kBounds, kBinaries, kEnd };
  Section section = Section::kNone;
  Sense sense = Sense::kMaximize;
  std::vector<std::pair<std::string, double>> objective;
  std::vector<PendingRow> rows;
  struct PendingBound {
    std::string name;
    double lo, hi;
  };
  std::vector<PendingBound> bounds;
  std::vector<std::string> binaries;

  std::size_t pos = 0;
  while (pos <= text.size() && section != Section::kEnd) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (!line.empty() && line.front() == '\\') continue;
    const auto tok = tokens(line);
    if (tok.empty()) continue;
    if (tok.size() == 1 && (tok[0] == "Maximize" || tok[0] == "Minimize")) {
      sense = tok[0] == "Maximize" ? Sense::kMaximize : Sense::kMinimize;
      section = Section::kObjective;
      continue;
    }
    if (tok.size() == 2 && tok[0] == "Subject" && tok[1] == "To") {
      section = Section::kRows;
      continue;
    }
    if (tok.size() == 1 && tok[0] == "Bounds") {
      section = Section::kBounds;
      continue;
    }
    if (tok.size() == 1 && tok[0] == "Binaries") {
      section = Section::kBinaries;
      continue;
    }
    if (tok.size() == 1 && tok[0] == "End") {
      section = Section::kEnd;
      continue;
    }
    switch (section) {
      case Section::kObjective: {
        if (tok[0].empty() || tok[0].back() != ':') throw FormatError("lp: objective needs a label");
        objective = parse_terms(tok, 1, tok.size());
        break;
      }
      case Section::kRows: {
        if (tok.size() < 3 || tok[0].back() != ':') throw FormatError("lp: malformed row");
        PendingRow row;
        row.name = std::string(tok[0].substr(0, tok[0].size() - 1));
        const std::string_view rel = tok[tok.size() - 2];
        if (rel == "<=") {
          row.relation = Relation::kLessEqual;
        } else if (rel == ">=") {
          row.relation = Relation::kGreaterEqual;
        } else if (rel == "=") {
          row.relation = Relation::kEqual;
        } else {
          throw FormatError("lp: unknown relation '" + std::string(rel) + "'");
        }
        row.rhs = parse_number(tok.back());
        row.terms = parse_terms(tok, 1, tok.size() - 2);
        rows.push_back(std::move(row));
        break;
      }
      case Section::kBounds: {
        if (tok.size() == 2 && tok[1] == "free") {
          bounds.push_back({std::string(tok[0]), -kInfinity, kInfinity});
        } else if (tok.size() == 3 && tok[1] == "=") {
          const double v = parse_number(tok[2]);
          bounds.push_back({std::string(tok[0]), v, v});
        } else if (tok.size() == 3 && tok[1] == ">=") {
          bounds.push_back({std::string(tok[0]), parse_number(tok[2]), kInfinity});
        } else if (tok.size() == 3 && tok[1] == "<=") {
          bounds.push_back({std::string(tok[0]), 0.0, parse_number(tok[2])});
        } else if (tok.size() == 5 && tok[1] == "<=" && tok[3] == "<=") {
          bounds.push_back({std::string(tok[2]), parse_number(tok[0]), parse_number(tok[4])});
        } else {
          throw FormatError("lp: malformed bound line");
        }
        break;
      }
      case Section::kBinaries:
        for (std::string_view t : tok) binaries.emplace_back(t);
        break;
      case Section::kNone:
      case Section::kEnd:
        throw FormatError("lp: content outside any section");
    }
  }
  if (section != Section::kEnd) throw FormatError("lp: missing End");

  MipModel mip;
  mip.sense = sense;
  for (const PendingBound& b : bounds) mip.add_var(b.name, b.lo, b.hi);
  for (const std::string& name : binaries) mip.add_var(name, 0.0, 1.0, true);
  auto col = [&](const std::string& name) {
    const auto it = mip.var_index.find(name);
    if (it != mip.var_index.end()) return it->second;
    return mip.add_var(name, 0.0, kInfinity);
  };
  for (const auto& [name, c] : objective) mip.objective.push_back({col(name), c});
  for (PendingRow& r : rows) {
    std::vector<LinearTerm> terms;
    for (const auto& [name, c] : r.terms) terms.push_back({col(name), c});
    mip.add_constraint(std::move(r.name), std::move(terms), r.relation, r.rhs);
  }
  return mip;
}

}  // namespace sprmip
