#include "irsnoma/neural.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "irsnoma/binary_io.hpp"

namespace irsnoma::nn {

namespace {

std::span<double> as_span(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<const double> as_span(const Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Matrix activate(const Matrix& z, Activation act) {
  switch (act) {
    case Activation::Identity: return z;
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Relu: return z.cwiseMax(0.0);
  }
  throw std::logic_error("unknown activation");
}

// dL/dz given dL/dy, pre-activation z and output y.
Matrix activation_backward(const Matrix& grad, const Matrix& z, const Matrix& y, Activation act) {
  switch (act) {
    case Activation::Identity: return grad;
    case Activation::Tanh: return (grad.array() * (1.0 - y.array().square())).matrix();
    case Activation::Relu: return (grad.array() * (z.array() > 0.0).cast<double>()).matrix();
  }
  throw std::logic_error("unknown activation");
}

template <typename Tensors>
bool spans_finite(const Tensors& tensors) {
  for (const auto& t : tensors) {
    for (double x : t) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

}  // namespace

MlpParams MlpParams::create(int input_size, std::span<const LayerSpec> specs, Rng& rng) {
  if (input_size < 1) throw std::invalid_argument("network input size must be positive");
  MlpParams out;
  int fan_in = input_size;
  for (const LayerSpec& spec : specs) {
    if (spec.width < 1) throw std::invalid_argument("layer width must be positive");
    const double bound = spec.init_bound > 0.0 ? spec.init_bound : 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(spec.width, fan_in);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    layer.bias.resize(spec.width);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = dist(rng);
    if (spec.batch_norm) {
      layer.norm = BatchNorm{Vector::Ones(spec.width), Vector::Zero(spec.width), Vector::Zero(spec.width),
                             Vector::Ones(spec.width)};
    }
    layer.activation = spec.activation;
    out.layers.push_back(std::move(layer));
    fan_in = spec.width;
  }
  return out;
}

int MlpParams::input_size() const {
  if (layers.empty()) throw std::logic_error("empty network");
  return layers.front().inputs();
}

int MlpParams::output_size() const {
  if (layers.empty()) throw std::logic_error("empty network");
  return layers.back().outputs();
}

void MlpParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    if (layer.bias.size() != layer.outputs()) throw std::invalid_argument("bias size mismatch in layer " + std::to_string(l));
    if (l > 0 && layers[l - 1].outputs() != layer.inputs()) {
      throw std::invalid_argument("layer " + std::to_string(l) + " input does not chain with previous output");
    }
    if (layer.norm) {
      const BatchNorm& bn = *layer.norm;
      if (bn.gamma.size() != layer.outputs() || bn.beta.size() != layer.outputs() ||
          bn.running_mean.size() != layer.outputs() || bn.running_var.size() != layer.outputs()) {
        throw std::invalid_argument("batch-norm size mismatch in layer " + std::to_string(l));
      }
      if ((bn.running_var.array() <= 0.0).any()) {
        throw std::invalid_argument("non-positive running variance in layer " + std::to_string(l));
      }
    }
  }
}

std::vector<std::span<double>> MlpParams::trainable() {
  std::vector<std::span<double>> out;
  for (DenseLayer& layer : layers) {
    out.push_back(as_span(layer.weight));
    out.push_back(as_span(layer.bias));
    if (layer.norm) {
      out.push_back(as_span(layer.norm->gamma));
      out.push_back(as_span(layer.norm->beta));
    }
  }
  return out;
}

std::vector<std::span<const double>> MlpParams::trainable() const {
  std::vector<std::span<const double>> out;
  for (const DenseLayer& layer : layers) {
    out.push_back(as_span(layer.weight));
    out.push_back(as_span(layer.bias));
    if (layer.norm) {
      out.push_back(as_span(layer.norm->gamma));
      out.push_back(as_span(layer.norm->beta));
    }
  }
  return out;
}

std::vector<std::span<double>> MlpParams::all_tensors() {
  std::vector<std::span<double>> out = trainable();
  for (DenseLayer& layer : layers) {
    if (layer.norm) {
      out.push_back(as_span(layer.norm->running_mean));
      out.push_back(as_span(layer.norm->running_var));
    }
  }
  return out;
}

std::vector<std::span<const double>> MlpParams::all_tensors() const {
  std::vector<std::span<const double>> out = trainable();
  for (const DenseLayer& layer : layers) {
    if (layer.norm) {
      out.push_back(as_span(layer.norm->running_mean));
      out.push_back(as_span(layer.norm->running_var));
    }
  }
  return out;
}

bool MlpParams::all_finite() const { return spans_finite(all_tensors()); }

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const DenseLayer& x = a.layers[l];
    const DenseLayer& y = b.layers[l];
    if (x.activation != y.activation || x.weight != y.weight || x.bias != y.bias) return false;
    if (x.norm.has_value() != y.norm.has_value()) return false;
    if (x.norm) {
      const BatchNorm& p = *x.norm;
      const BatchNorm& q = *y.norm;
      if (p.gamma != q.gamma || p.beta != q.beta || p.running_mean != q.running_mean ||
          p.running_var != q.running_var || p.eps != q.eps || p.momentum != q.momentum) {
        return false;
      }
    }
  }
  return true;
}

ForwardPass evaluate(const MlpParams& params, const Matrix& input, Mode mode) {
  if (input.cols() != params.input_size()) {
    throw std::invalid_argument("input width " + std::to_string(input.cols()) + " does not match network input " +
                                std::to_string(params.input_size()));
  }
  if (input.rows() < 1) throw std::invalid_argument("empty batch");
  const double batch = static_cast<double>(input.rows());

  ForwardPass pass;
  pass.cache.mode = mode;
  pass.cache.params_version = params.version();
  pass.cache.layers.reserve(params.layers.size());
  Matrix x = input;
  for (const DenseLayer& layer : params.layers) {
    LayerCache lc;
    lc.input = x;
    Matrix z = (x * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    if (layer.norm) {
      const BatchNorm& bn = *layer.norm;
      Vector mean;
      Vector var;
      if (mode == Mode::Train) {
        if (input.rows() < 2) throw std::invalid_argument("train-mode batch norm needs a batch of at least 2");
        mean = z.colwise().mean().transpose();
        var = (z.rowwise() - mean.transpose()).array().square().colwise().sum().transpose() / batch;
        lc.batch_mean = mean;
        lc.batch_var = var;
      } else {
        mean = bn.running_mean;
        var = bn.running_var;
      }
      lc.inv_std = (var.array() + bn.eps).rsqrt().matrix();
      lc.normalized = ((z.rowwise() - mean.transpose()).array().rowwise() * lc.inv_std.transpose().array()).matrix();
      z = (lc.normalized.array().rowwise() * bn.gamma.transpose().array()).matrix().rowwise() + bn.beta.transpose();
    }
    lc.pre_activation = z;
    lc.output = activate(z, layer.activation);
    x = lc.output;
    pass.cache.layers.push_back(std::move(lc));
  }
  pass.output = std::move(x);
  pass.cache.valid = true;
  return pass;
}

ForwardPass forward(MlpParams& params, const Matrix& input, Mode mode) {
  ForwardPass pass = evaluate(params, input, mode);
  if (mode == Mode::Train) {
    const double n = static_cast<double>(input.rows());
    bool touched = false;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      auto& norm = params.layers[l].norm;
      if (!norm) continue;
      const LayerCache& lc = pass.cache.layers[l];
      norm->running_mean = norm->momentum * norm->running_mean + (1.0 - norm->momentum) * lc.batch_mean;
      norm->running_var = norm->momentum * norm->running_var + (1.0 - norm->momentum) * (lc.batch_var * (n / (n - 1.0)));
      touched = true;
    }
    // Running statistics do not enter a train-mode backward pass, so the
    // cache stays valid for this parameter set.
    if (touched) {
      params.touch();
      pass.cache.params_version = params.version();
    }
  }
  return pass;
}

Matrix predict(const MlpParams& params, const Matrix& input) {
  return evaluate(params, input, Mode::Inference).output;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
  MlpGrads g;
  for (const DenseLayer& layer : params.layers) {
    LayerGrads lg;
    lg.weight = Matrix::Zero(layer.outputs(), layer.inputs());
    lg.bias = Vector::Zero(layer.outputs());
    if (layer.norm) {
      lg.gamma = Vector::Zero(layer.outputs());
      lg.beta = Vector::Zero(layer.outputs());
    }
    g.layers.push_back(std::move(lg));
  }
  return g;
}

std::vector<std::span<double>> MlpGrads::tensors() {
  std::vector<std::span<double>> out;
  for (LayerGrads& lg : layers) {
    out.push_back(as_span(lg.weight));
    out.push_back(as_span(lg.bias));
    if (lg.gamma.size() > 0) {
      out.push_back(as_span(lg.gamma));
      out.push_back(as_span(lg.beta));
    }
  }
  return out;
}

std::vector<std::span<const double>> MlpGrads::tensors() const {
  std::vector<std::span<const double>> out;
  for (const LayerGrads& lg : layers) {
    out.push_back(as_span(lg.weight));
    out.push_back(as_span(lg.bias));
    if (lg.gamma.size() > 0) {
      out.push_back(as_span(lg.gamma));
      out.push_back(as_span(lg.beta));
    }
  }
  return out;
}

BackwardResult backward(const MlpParams& params, const ForwardCache& cache, const Matrix& output_grad) {
  if (!cache.valid) throw std::logic_error("backward called without a forward cache");
  if (cache.params_version != params.version() || cache.layers.size() != params.layers.size()) {
    throw std::logic_error("stale forward cache: parameters changed since the forward pass");
  }
  const Matrix& out = cache.layers.back().output;
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
    throw std::invalid_argument("output gradient shape does not match network output");
  }
  BackwardResult result;
  result.params.layers.resize(params.layers.size());
  Matrix grad = output_grad;
  for (std::size_t idx = params.layers.size(); idx-- > 0;) {
    const DenseLayer& layer = params.layers[idx];
    const LayerCache& lc = cache.layers[idx];
    LayerGrads& lg = result.params.layers[idx];

    Matrix dz = activation_backward(grad, lc.pre_activation, lc.output, layer.activation);
    if (layer.norm) {
      const BatchNorm& bn = *layer.norm;
      lg.gamma = (dz.array() * lc.normalized.array()).colwise().sum().transpose();
      lg.beta = dz.colwise().sum().transpose();
      const Matrix dxhat = (dz.array().rowwise() * bn.gamma.transpose().array()).matrix();
      if (cache.mode == Mode::Train) {
        const double n = static_cast<double>(dz.rows());
        const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
        const Eigen::RowVectorXd sum_dxhat_xhat = (dxhat.array() * lc.normalized.array()).colwise().sum();
        const Eigen::ArrayXXd centered = (n * dxhat).rowwise() - sum_dxhat;
        const Eigen::ArrayXXd corr = lc.normalized.array().rowwise() * sum_dxhat_xhat.array();
        dz = ((centered - corr).rowwise() * (lc.inv_std.transpose().array() / n)).matrix();
      } else {
        dz = (dxhat.array().rowwise() * lc.inv_std.transpose().array()).matrix();
      }
    }
    lg.weight = dz.transpose() * lc.input;
    lg.bias = dz.colwise().sum().transpose();
    grad = dz * layer.weight;
  }
  result.input = std::move(grad);
  return result;
}

AdamState AdamState::for_params(const MlpParams& params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const auto& t : params.trainable()) {
    state.first.push_back(Vector::Zero(static_cast<Eigen::Index>(t.size())));
    state.second.push_back(Vector::Zero(static_cast<Eigen::Index>(t.size())));
  }
  return state;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state) {
  auto p = params.trainable();
  const auto g = grads.tensors();
  if (p.size() != g.size() || p.size() != state.first.size()) {
    throw std::invalid_argument("Adam: gradient/state layout does not match parameters");
  }
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t].size() != g[t].size() || static_cast<Eigen::Index>(p[t].size()) != state.first[t].size()) {
      throw std::invalid_argument("Adam: tensor " + std::to_string(t) + " shape mismatch");
    }
  }
  if (!spans_finite(g)) throw TrainingDivergence("non-finite gradient entry");

  const AdamConfig& c = state.config;
  ++state.step;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < p.size(); ++t) {
    Eigen::Map<Vector> param(p[t].data(), static_cast<Eigen::Index>(p[t].size()));
    const Eigen::Map<const Vector> grad(g[t].data(), static_cast<Eigen::Index>(g[t].size()));
    Vector& m = state.first[t];
    Vector& v = state.second[t];
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseAbs2();
    param.array() -= c.learning_rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + c.eps);
  }
  params.touch();
}

void soft_update(MlpParams& target, const MlpParams& train, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft update rate must lie in [0, 1]");
  auto dst = target.all_tensors();
  const auto src = train.all_tensors();
  if (dst.size() != src.size()) throw std::invalid_argument("soft update: network layouts differ");
  for (std::size_t t = 0; t < dst.size(); ++t) {
    if (dst[t].size() != src[t].size()) throw std::invalid_argument("soft update: tensor shapes differ");
  }
  for (std::size_t t = 0; t < dst.size(); ++t) {
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] = tau * src[t][i] + (1.0 - tau) * dst[t][i];
  }
  target.touch();
}

void save(std::ostream& os, const MlpParams& params) {
  io::write_magic(os, "IRSMLP01");
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.layers.size()));
  for (const DenseLayer& layer : params.layers) {
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(layer.inputs()));
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(layer.outputs()));
    io::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(layer.activation));
    io::write_pod<std::uint8_t>(os, layer.norm ? 1 : 0);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = layer.weight;
    io::write_doubles(os, {w.data(), static_cast<std::size_t>(w.size())});
    io::write_doubles(os, as_span(layer.bias));
    if (layer.norm) {
      io::write_pod(os, layer.norm->eps);
      io::write_pod(os, layer.norm->momentum);
      io::write_doubles(os, as_span(layer.norm->gamma));
      io::write_doubles(os, as_span(layer.norm->beta));
      io::write_doubles(os, as_span(layer.norm->running_mean));
      io::write_doubles(os, as_span(layer.norm->running_var));
    }
  }
  if (!os) throw std::runtime_error("failed writing network checkpoint");
}

MlpParams load_mlp(std::istream& is) {
  io::expect_magic(is, "IRSMLP01");
  const auto count = io::read_pod<std::uint32_t>(is);
  MlpParams params;
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto in = static_cast<Eigen::Index>(io::read_pod<std::uint32_t>(is));
    const auto out = static_cast<Eigen::Index>(io::read_pod<std::uint32_t>(is));
    const auto act = io::read_pod<std::uint8_t>(is);
    const auto has_norm = io::read_pod<std::uint8_t>(is);
    if (act > 2) throw std::runtime_error("unknown activation in checkpoint");
    DenseLayer layer;
    layer.activation = static_cast<Activation>(act);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(out, in);
    io::read_doubles(is, {w.data(), static_cast<std::size_t>(w.size())});
    layer.weight = w;
    layer.bias.resize(out);
    io::read_doubles(is, as_span(layer.bias));
    if (has_norm) {
      BatchNorm bn;
      bn.eps = io::read_pod<double>(is);
      bn.momentum = io::read_pod<double>(is);
      for (Vector* v : {&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var}) {
        v->resize(out);
        io::read_doubles(is, as_span(*v));
      }
      layer.norm = std::move(bn);
    }
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

void save(std::ostream& os, const AdamState& state) {
  io::write_magic(os, "IRSADAM1");
  io::write_pod(os, state.config.learning_rate);
  io::write_pod(os, state.config.beta1);
  io::write_pod(os, state.config.beta2);
  io::write_pod(os, state.config.eps);
  io::write_pod<std::int64_t>(os, state.step);
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(state.first.size()));
  for (std::size_t t = 0; t < state.first.size(); ++t) {
    io::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(state.first[t].size()));
    io::write_doubles(os, as_span(state.first[t]));
    io::write_doubles(os, as_span(state.second[t]));
  }
  if (!os) throw std::runtime_error("failed writing optimizer checkpoint");
}

AdamState load_adam(std::istream& is) {
  io::expect_magic(is, "IRSADAM1");
  AdamState state;
  state.config.learning_rate = io::read_pod<double>(is);
  state.config.beta1 = io::read_pod<double>(is);
  state.config.beta2 = io::read_pod<double>(is);
  state.config.eps = io::read_pod<double>(is);
  state.step = io::read_pod<std::int64_t>(is);
  const auto count = io::read_pod<std::uint32_t>(is);
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto len = static_cast<Eigen::Index>(io::read_pod<std::uint64_t>(is));
    Vector m(len);
    Vector v(len);
    io::read_doubles(is, as_span(m));
    io::read_doubles(is, as_span(v));
    state.first.push_back(std::move(m));
    state.second.push_back(std::move(v));
  }
  return state;
}

namespace {

Matrix stack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

void check_trunk(const BranchedNet& net) {
  if (net.trunk.input_size() != net.left.output_size() + net.right.output_size()) {
    throw std::invalid_argument("trunk input must equal the stacked branch widths");
  }
}

}  // namespace

BranchedForward evaluate(const BranchedNet& net, const Matrix& left_in, const Matrix& right_in, Mode mode) {
  check_trunk(net);
  if (left_in.rows() != right_in.rows()) throw std::invalid_argument("branch inputs have different batch sizes");
  BranchedForward out;
  ForwardPass l = evaluate(net.left, left_in, mode);
  ForwardPass r = evaluate(net.right, right_in, mode);
  ForwardPass t = evaluate(net.trunk, stack(l.output, r.output), mode);
  out.output = std::move(t.output);
  out.left = std::move(l.cache);
  out.right = std::move(r.cache);
  out.trunk = std::move(t.cache);
  return out;
}

BranchedForward forward(BranchedNet& net, const Matrix& left_in, const Matrix& right_in, Mode mode) {
  check_trunk(net);
  if (left_in.rows() != right_in.rows()) throw std::invalid_argument("branch inputs have different batch sizes");
  BranchedForward out;
  ForwardPass l = forward(net.left, left_in, mode);
  ForwardPass r = forward(net.right, right_in, mode);
  ForwardPass t = forward(net.trunk, stack(l.output, r.output), mode);
  out.output = std::move(t.output);
  out.left = std::move(l.cache);
  out.right = std::move(r.cache);
  out.trunk = std::move(t.cache);
  return out;
}

Matrix predict(const BranchedNet& net, const Matrix& left_in, const Matrix& right_in) {
  return evaluate(net, left_in, right_in, Mode::Inference).output;
}

BranchedGrads backward(const BranchedNet& net, const BranchedForward& pass, const Matrix& output_grad) {
  BackwardResult t = backward(net.trunk, pass.trunk, output_grad);
  const Eigen::Index lw = net.left.output_size();
  const Eigen::Index rw = net.right.output_size();
  BackwardResult l = backward(net.left, pass.left, t.input.leftCols(lw));
  BackwardResult r = backward(net.right, pass.right, t.input.rightCols(rw));
  return BranchedGrads{std::move(l.params), std::move(r.params), std::move(t.params), std::move(l.input),
                       std::move(r.input)};
}

void soft_update(BranchedNet& target, const BranchedNet& train, double tau) {
  soft_update(target.left, train.left, tau);
  soft_update(target.right, train.right, tau);
  soft_update(target.trunk, train.trunk, tau);
}

}  // namespace irsnoma::nn
