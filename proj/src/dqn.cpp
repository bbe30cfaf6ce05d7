#include "deepcas/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "deepcas/errors.hpp"
#include "deepcas/kernels/kernels.hpp"

namespace deepcas {

QNetwork::QNetwork(std::size_t inputs, std::size_t hidden, std::size_t actions)
    : inputs_(inputs),
      hidden_(hidden),
      actions_(actions),
      theta_(inputs * hidden + hidden + actions * hidden + actions, 0.0) {
  require(inputs > 0 && hidden > 0 && actions > 0, "QNetwork: dimensions must be positive");
}

QNetwork QNetwork::random_init(std::size_t inputs, std::size_t hidden, std::size_t actions,
                               RandomSource& rng) {
  QNetwork net(inputs, hidden, actions);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(inputs));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (std::size_t d = 0; d < inputs; ++d)
    for (double& w : net.w1_row(d)) w = bound1 * (2.0 * rng.uniform() - 1.0);
  for (std::size_t a = 0; a < actions; ++a)
    for (double& w : net.w2_row(a)) w = bound2 * (2.0 * rng.uniform() - 1.0);
  return net;
}

bool QNetwork::all_finite() const {
  return std::all_of(theta_.begin(), theta_.end(), [](double x) { return std::isfinite(x); });
}

void forward(const QNetwork& net, std::span<const double> obs, ForwardPass& pass) {
  require(obs.size() == net.inputs(), "forward: observation length does not match network input");
  const auto b1 = net.b1();
  pass.pre.assign(b1.begin(), b1.end());
  for (std::size_t d = 0; d < net.inputs(); ++d) kernels::axpy(obs[d], net.w1_row(d), pass.pre);
  pass.hidden = pass.pre;
  kernels::relu(pass.hidden);
  pass.q.resize(net.actions());
  const auto b2 = net.b2();
  for (std::size_t a = 0; a < net.actions(); ++a)
    pass.q[a] = kernels::dot(net.w2_row(a), pass.hidden) + b2[a];
}

std::vector<double> forward(const QNetwork& net, std::span<const double> obs) {
  ForwardPass pass;
  forward(net, obs, pass);
  return std::move(pass.q);
}

ActionIndex argmax(std::span<const double> values) {
  require(!values.empty(), "argmax: empty input");
  ActionIndex best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

ActionIndex select_action(const QNetwork& net, std::span<const double> obs, double epsilon,
                          RandomSource& rng) {
  if (rng.uniform() < epsilon) return rng.uniform_index(net.actions());
  return argmax(forward(net, obs));
}

std::vector<double> td_targets(const QNetwork& net, const Batch& batch, double gamma) {
  std::vector<double> y(batch.size());
  ForwardPass pass;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Transition& tr = batch[j];
    if (tr.terminal || gamma == 0.0) {
      y[j] = tr.r;
      continue;
    }
    forward(net, tr.s_next, pass);
    y[j] = tr.r + gamma * *std::max_element(pass.q.begin(), pass.q.end());
  }
  return y;
}

namespace {

// Loss and (optionally) gradient in one sweep over the batch.
double loss_and_gradient(const QNetwork& net, const Batch& batch, std::span<const double> targets,
                         std::vector<double>* grad, double huber_delta = 0.0) {
  require(!batch.empty(), "minibatch: batch must not be empty");
  require(targets.size() == batch.size(), "minibatch: one target per transition");
  const std::size_t H = net.hidden();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  if (grad != nullptr) grad->assign(net.parameter_count(), 0.0);

  ForwardPass pass;
  std::vector<double> dh(H);
  double loss = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Transition& tr = batch[j];
    require(tr.a < net.actions(), "minibatch: action index out of range");
    forward(net, tr.s, pass);
    double diff = pass.q[tr.a] - targets[j];
    if (huber_delta > 0.0 && std::abs(diff) > huber_delta) {
      loss += huber_delta * (std::abs(diff) - 0.5 * huber_delta);
      diff = std::copysign(huber_delta, diff);
    } else {
      loss += 0.5 * diff * diff;
    }
    if (grad == nullptr) continue;

    const double dq = diff * inv_batch;
    double* g = grad->data();
    kernels::axpy(dq, pass.hidden, {g + net.w2_offset() + tr.a * H, H});
    g[net.b2_offset() + tr.a] += dq;

    std::fill(dh.begin(), dh.end(), 0.0);
    kernels::axpy(dq, net.w2_row(tr.a), dh);
    kernels::relu_mask(pass.pre, dh);
    kernels::axpy(1.0, dh, {g + net.b1_offset(), H});
    for (std::size_t d = 0; d < net.inputs(); ++d)
      if (tr.s[d] != 0.0) kernels::axpy(tr.s[d], dh, {g + net.w1_offset() + d * H, H});
  }
  return loss * inv_batch;
}

}  // namespace

double batch_loss(const QNetwork& net, const Batch& batch, std::span<const double> targets,
                  double huber_delta) {
  return loss_and_gradient(net, batch, targets, nullptr, huber_delta);
}

std::vector<double> batch_gradient(const QNetwork& net, const Batch& batch,
                                   std::span<const double> targets, double huber_delta) {
  std::vector<double> grad;
  loss_and_gradient(net, batch, targets, &grad, huber_delta);
  return grad;
}

AdamState AdamState::for_network(const QNetwork& net, double learning_rate) {
  AdamState s;
  s.m.assign(net.parameter_count(), 0.0);
  s.v.assign(net.parameter_count(), 0.0);
  s.learning_rate = learning_rate;
  return s;
}

void adam_update(QNetwork& net, AdamState& adam, std::span<const double> gradient) {
  require(gradient.size() == net.parameter_count() && adam.m.size() == gradient.size() &&
              adam.v.size() == gradient.size(),
          "adam_update: size mismatch");
  ++adam.step;
  const double t = static_cast<double>(adam.step);
  const kernels::AdamCoeffs c{adam.learning_rate,
                              adam.beta1,
                              adam.beta2,
                              adam.epsilon,
                              1.0 - std::pow(adam.beta1, t),
                              1.0 - std::pow(adam.beta2, t)};
  kernels::adam(net.parameters(), adam.m, adam.v, gradient, c);
}

double minibatch_step(QNetwork& net, AdamState& adam, const Batch& batch, double gamma,
                      double huber_delta) {
  const std::vector<double> targets = td_targets(net, batch, gamma);
  std::vector<double> grad;
  const double loss = loss_and_gradient(net, batch, targets, &grad, huber_delta);

  const bool grad_ok =
      std::isfinite(loss) &&
      std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
  if (!grad_ok) {
    std::ostringstream msg;
    msg << "non-finite gradient at ADAM step " << adam.step + 1 << " (batch loss " << loss
        << ", batch size " << batch.size() << "); targets:";
    for (double y : targets) msg << ' ' << y;
    throw TrainingFailure(msg.str());
  }
  adam_update(net, adam, grad);
  if (!net.all_finite())
    throw TrainingFailure("non-finite parameters after ADAM step " + std::to_string(adam.step));
  return loss;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity > 0, "ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition tr) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(tr));
  } else {
    data_[cursor_] = std::move(tr);
  }
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  require(i < size_, "ReplayBuffer::at: index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : cursor_;
  return data_[(oldest + i) % capacity_];
}

std::optional<Batch> ReplayBuffer::sample_minibatch(std::size_t batch_size,
                                                    RandomSource& rng) const {
  if (batch_size == 0 || size_ < batch_size) return std::nullopt;
  Batch batch;
  batch.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) batch.push_back(data_[rng.uniform_index(size_)]);
  return batch;
}

ReplayBuffer ReplayBuffer::restore(std::size_t capacity, std::size_t cursor,
                                   std::vector<Transition> storage) {
  require(storage.size() <= capacity && cursor < capacity, "ReplayBuffer::restore: bad ring state");
  require(storage.size() == capacity || cursor == storage.size() % capacity,
          "ReplayBuffer::restore: cursor inconsistent with size");
  ReplayBuffer buf(capacity);
  buf.cursor_ = cursor;
  buf.size_ = storage.size();
  buf.data_ = std::move(storage);
  return buf;
}

double epsilon_schedule(int epoch, double rate, double floor) {
  require(epoch >= 0, "epsilon_schedule: epoch must be nonnegative");
  return std::max(floor, std::pow(rate, epoch));
}

}  // namespace deepcas
