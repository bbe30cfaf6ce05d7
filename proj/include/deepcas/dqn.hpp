#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "deepcas/combinatorics.hpp"
#include "deepcas/random.hpp"

namespace deepcas {

// Two-layer Q-network: Q(s) = W2 relu(W1 s + b1) + b2.
//
// All parameters live in one contiguous vector so the optimizer touches them
// with a single kernel call. W1 is stored input-major (row d holds the H
// weights fed by input d), which turns the hidden layer into D axpy calls.
// W2 is stored row-major, one H-row per action.
class QNetwork {
 public:
  QNetwork() = default;
  QNetwork(std::size_t inputs, std::size_t hidden, std::size_t actions);

  // Uniform in +-1/sqrt(fan_in) per layer, biases zero.
  static QNetwork random_init(std::size_t inputs, std::size_t hidden, std::size_t actions,
                              RandomSource& rng);

  std::size_t inputs() const { return inputs_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t actions() const { return actions_; }
  std::size_t parameter_count() const { return theta_.size(); }

  std::span<double> parameters() { return theta_; }
  std::span<const double> parameters() const { return theta_; }

  // Input-major view: w1_row(d)[h] is the weight from input d to hidden unit h.
  std::span<double> w1_row(std::size_t d) { return slice(w1_offset() + d * hidden_, hidden_); }
  std::span<const double> w1_row(std::size_t d) const {
    return slice(w1_offset() + d * hidden_, hidden_);
  }
  std::span<double> b1() { return slice(b1_offset(), hidden_); }
  std::span<const double> b1() const { return slice(b1_offset(), hidden_); }
  std::span<double> w2_row(std::size_t a) { return slice(w2_offset() + a * hidden_, hidden_); }
  std::span<const double> w2_row(std::size_t a) const {
    return slice(w2_offset() + a * hidden_, hidden_);
  }
  std::span<double> b2() { return slice(b2_offset(), actions_); }
  std::span<const double> b2() const { return slice(b2_offset(), actions_); }

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return inputs_ * hidden_; }
  std::size_t w2_offset() const { return b1_offset() + hidden_; }
  std::size_t b2_offset() const { return w2_offset() + actions_ * hidden_; }

  bool all_finite() const;

  friend bool operator==(const QNetwork&, const QNetwork&) = default;

 private:
  std::span<double> slice(std::size_t off, std::size_t len) { return {theta_.data() + off, len}; }
  std::span<const double> slice(std::size_t off, std::size_t len) const {
    return {theta_.data() + off, len};
  }

  std::size_t inputs_ = 0;
  std::size_t hidden_ = 0;
  std::size_t actions_ = 0;
  std::vector<double> theta_;
};

// Intermediate activations kept for backpropagation.
struct ForwardPass {
  std::vector<double> pre;     // W1 s + b1
  std::vector<double> hidden;  // relu(pre)
  std::vector<double> q;
};

std::vector<double> forward(const QNetwork& net, std::span<const double> obs);
void forward(const QNetwork& net, std::span<const double> obs, ForwardPass& pass);

// Index of the largest entry; ties go to the lowest index.
ActionIndex argmax(std::span<const double> values);

// Epsilon-greedy.
ActionIndex select_action(const QNetwork& net, std::span<const double> obs, double epsilon,
                          RandomSource& rng);

struct Transition {
  std::vector<double> s;
  ActionIndex a = 0;
  double r = 0.0;
  std::vector<double> s_next;
  bool terminal = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

using Batch = std::vector<Transition>;

// y = r + gamma * max_a' Q(s', a') with the current network; y = r if terminal.
std::vector<double> td_targets(const QNetwork& net, const Batch& batch, double gamma);

// Mean over the batch of 1/2 (y - Q(s, a))^2 with y held fixed. A positive
// huber_delta switches residuals beyond it to the linear Huber branch, which
// bounds each sample's gradient by huber_delta.
double batch_loss(const QNetwork& net, const Batch& batch, std::span<const double> targets,
                  double huber_delta = 0.0);

// Gradient of batch_loss w.r.t. the parameters (same layout as parameters()).
std::vector<double> batch_gradient(const QNetwork& net, const Batch& batch,
                                   std::span<const double> targets, double huber_delta = 0.0);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_network(const QNetwork& net, double learning_rate);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One ADAM update from a precomputed gradient.
void adam_update(QNetwork& net, AdamState& adam, std::span<const double> gradient);

// TD targets, semi-gradient of the batch loss, one ADAM update. Returns the
// batch loss before the update. Throws TrainingFailure on non-finite values.
double minibatch_step(QNetwork& net, AdamState& adam, const Batch& batch, double gamma,
                      double huber_delta = 0.0);

// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 20000);

  void push(Transition tr);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  // Oldest-first index: at(0) is the oldest stored transition.
  const Transition& at(std::size_t i) const;

  // Uniform sampling with replacement; nullopt until size() >= batch_size.
  std::optional<Batch> sample_minibatch(std::size_t batch_size, RandomSource& rng) const;

  // Raw ring access for checkpointing.
  std::size_t cursor() const { return cursor_; }
  const std::vector<Transition>& storage() const { return data_; }
  static ReplayBuffer restore(std::size_t capacity, std::size_t cursor,
                              std::vector<Transition> storage);

  friend bool operator==(const ReplayBuffer&, const ReplayBuffer&) = default;

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::vector<Transition> data_;
};

// epsilon(epoch) = max(floor, rate^epoch)
double epsilon_schedule(int epoch, double rate = 0.9, double floor = 0.001);

}  // namespace deepcas
