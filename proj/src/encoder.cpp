#include "sogclr/encoder.hpp"

#include <cmath>

#include "sogclr/errors.hpp"
#include "sogclr/text_io.hpp"

namespace sogclr {

const char* to_string(Architecture arch) noexcept {
  return arch == Architecture::linear ? "linear" : "one_hidden";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "linear") return Architecture::linear;
  if (name == "one_hidden") return Architecture::one_hidden;
  fail(ErrorKind::invalid_argument, "unknown encoder architecture '" + name + "'");
}

EncoderParams EncoderParams::linear(Matrix w) {
  EncoderParams p;
  p.arch_ = Architecture::linear;
  p.w1_ = std::move(w);
  p.validate();
  return p;
}

EncoderParams EncoderParams::one_hidden(Matrix w1, Matrix w2) {
  EncoderParams p;
  p.arch_ = Architecture::one_hidden;
  p.w1_ = std::move(w1);
  p.w2_ = std::move(w2);
  p.validate();
  return p;
}

EncoderParams EncoderParams::random(Architecture arch, std::size_t input_dim, std::size_t hidden_dim,
                                    std::size_t embed_dim, std::uint64_t seed, double scale) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](std::size_t rows, std::size_t cols) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const double s = scale / std::sqrt(static_cast<double>(cols));
    // Row-major draw order so the init is tied to the flattening order.
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = s * normal(rng);
    return m;
  };
  if (arch == Architecture::linear) return linear(draw(embed_dim, input_dim));
  Matrix w1 = draw(hidden_dim, input_dim);
  Matrix w2 = draw(embed_dim, hidden_dim);
  return one_hidden(std::move(w1), std::move(w2));
}

void EncoderParams::validate() const {
  if (w1_.size() == 0) fail(ErrorKind::invalid_argument, "encoder W1 is empty");
  if (!w1_.allFinite() || !w2_.allFinite()) fail(ErrorKind::invalid_argument, "encoder weights must be finite");
  if (arch_ == Architecture::one_hidden) {
    if (w2_.cols() != w1_.rows()) fail(ErrorKind::invalid_argument, "encoder W2 columns must equal W1 rows");
  } else if (w2_.size() != 0) {
    fail(ErrorKind::invalid_argument, "linear encoder has no W2");
  }
  if (embed_dim() < 2) fail(ErrorKind::invalid_argument, "embedding dimension must be >= 2");
}

Vector EncoderParams::flatten() const {
  Vector flat(static_cast<Eigen::Index>(size()));
  Eigen::Index pos = 0;
  for (const Matrix* m : {&w1_, &w2_})
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) flat[pos++] = (*m)(r, c);
  return flat;
}

EncoderParams EncoderParams::with_values(const Vector& flat) const {
  if (static_cast<std::size_t>(flat.size()) != size()) {
    fail(ErrorKind::invalid_argument, "flat parameter vector has wrong size");
  }
  EncoderParams p = *this;
  Eigen::Index pos = 0;
  for (Matrix* m : {&p.w1_, &p.w2_})
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) = flat[pos++];
  return p;
}

void EncoderParams::subtract(const Vector& step) {
  if (static_cast<std::size_t>(step.size()) != size()) fail(ErrorKind::invalid_argument, "update has wrong size");
  if (!(flatten() - step).allFinite()) fail(ErrorKind::numeric, "parameter update overflows");
  Eigen::Index pos = 0;
  for (Matrix* m : {&w1_, &w2_})
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) -= step[pos++];
}

Forward forward(const EncoderParams& params, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != params.input_dim()) {
    fail(ErrorKind::invalid_argument, "encoder input has dimension " + std::to_string(x.size()) + ", expected " +
                                          std::to_string(params.input_dim()));
  }
  Forward f;
  f.input = x;
  if (params.architecture() == Architecture::linear) {
    f.raw = params.w1() * x;
  } else {
    f.hidden = (params.w1() * x).array().tanh().matrix();
    f.raw = params.w2() * f.hidden;
  }
  f.raw_norm = f.raw.norm();
  if (!std::isfinite(f.raw_norm)) fail(ErrorKind::numeric, "encoder output is not finite");
  if (!(f.raw_norm >= 1e-12)) fail(ErrorKind::degenerate_input, "encoder output collapsed before normalization");
  f.embedding = f.raw / f.raw_norm;
  return f;
}

Vector encode(const EncoderParams& params, const Vector& x) { return forward(params, x).embedding; }

void accumulate_vjp(const EncoderParams& params, const Forward& fwd, const Vector& cotangent, Gradient& out) {
  const auto& e = fwd.embedding;
  const Vector d_raw = (cotangent - e * e.dot(cotangent)) / fwd.raw_norm;
  const auto& w1 = params.w1();
  const Eigen::Index n1 = w1.size();
  // Row-major flattening: grad of W(r, c) lives at r * cols + c.
  auto add_outer = [&out](Eigen::Index offset, const Vector& left, const Vector& right) {
    for (Eigen::Index r = 0; r < left.size(); ++r) {
      out.segment(offset + r * right.size(), right.size()) += left[r] * right;
    }
  };
  if (params.architecture() == Architecture::linear) {
    add_outer(0, d_raw, fwd.input);
    return;
  }
  add_outer(n1, d_raw, fwd.hidden);
  const Vector d_hidden = params.w2().transpose() * d_raw;
  const Vector d_pre = d_hidden.cwiseProduct((1.0 - fwd.hidden.array().square()).matrix());
  add_outer(0, d_pre, fwd.input);
}

Gradient vjp_sim(const EncoderParams& params, const Vector& x_a, const Vector& x_b, double cotangent) {
  const Forward fa = forward(params, x_a);
  const Forward fb = forward(params, x_b);
  Gradient g = Gradient::Zero(static_cast<Eigen::Index>(params.size()));
  accumulate_vjp(params, fa, cotangent * fb.embedding, g);
  accumulate_vjp(params, fb, cotangent * fa.embedding, g);
  return g;
}

Gradient finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& w, double h) {
  if (!(h > 0.0)) fail(ErrorKind::invalid_argument, "finite-difference step must be positive");
  Gradient g(w.size());
  Vector probe = w;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    probe[j] = w[j] + h;
    const double up = f(probe);
    probe[j] = w[j] - h;
    const double down = f(probe);
    probe[j] = w[j];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      fail(ErrorKind::numeric, "non-finite function value at coordinate " + std::to_string(j));
    }
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

Gradient finite_diff_grad(const std::function<double(const EncoderParams&)>& f, const EncoderParams& params,
                          double h) {
  return finite_diff_grad([&](const Vector& w) { return f(params.with_values(w)); }, params.flatten(), h);
}

double relative_error(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail(ErrorKind::invalid_argument, "relative_error: size mismatch");
  const double denom = std::max({a.norm(), b.norm(), 1e-10});
  return (a - b).norm() / denom;
}

void write_encoder_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  std::string out = "encoder ";
  out += to_string(params.architecture());
  out += ' ' + std::to_string(params.input_dim()) + ' ' + std::to_string(params.hidden_dim()) + ' ' +
         std::to_string(params.embed_dim()) + '\n';
  const Vector flat = params.flatten();
  for (double v : flat) {
    out += text::format_double(v);
    out += '\n';
  }
  text::write_file(path, out);
}

EncoderParams read_encoder_checkpoint(const std::filesystem::path& path) {
  const auto lines = text::read_lines(path);
  if (lines.empty()) fail(ErrorKind::io, "empty encoder checkpoint '" + path.string() + "'");
  const auto header = text::split(text::trim(lines.front()), ' ');
  if (header.size() != 5 || header[0] != "encoder") {
    fail(ErrorKind::io, "bad encoder checkpoint header in '" + path.string() + "'");
  }
  const auto arch = parse_architecture(std::string(header[1]));
  const auto d_in = static_cast<Eigen::Index>(text::parse_int(header[2]));
  const auto d_h = static_cast<Eigen::Index>(text::parse_int(header[3]));
  const auto m = static_cast<Eigen::Index>(text::parse_int(header[4]));
  EncoderParams shape = arch == Architecture::linear
                            ? EncoderParams::linear(Matrix::Ones(m, d_in))
                            : EncoderParams::one_hidden(Matrix::Ones(d_h, d_in), Matrix::Ones(m, d_h));
  Vector flat(static_cast<Eigen::Index>(shape.size()));
  Eigen::Index pos = 0;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto tok = text::trim(lines[l]);
    if (tok.empty()) continue;
    if (pos >= flat.size()) fail(ErrorKind::io, "too many values in '" + path.string() + "'");
    flat[pos++] = text::parse_double(tok);
  }
  if (pos != flat.size()) fail(ErrorKind::io, "too few values in '" + path.string() + "'");
  return shape.with_values(flat);
}

}  // namespace sogclr
