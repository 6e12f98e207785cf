#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "agriclip/contrastive/clip_loss.hpp"
#include "agriclip/corpus/dataset.hpp"
#include "agriclip/corpus/vocab.hpp"
#include "agriclip/encoders/encoder.hpp"
#include "agriclip/numerics/adamw.hpp"

namespace agriclip::contrastive {

struct ContrastiveConfig {
  std::size_t batch_size = 32;
  double temperature = 0.07;
  std::size_t epochs = 20;
  double lr = 5e-4;
  double weight_decay = 0.04;
  bool symmetric = true;
  std::uint64_t seed = 0;
};

inline void validate(const ContrastiveConfig& c) {
  if (c.batch_size < 2) throw ConfigError("contrastive batch size must be at least 2");
  if (!(c.temperature > 0.0)) throw ConfigError("contrastive temperature must be positive");
  if (!(c.lr > 0.0) || c.weight_decay < 0.0) throw ConfigError("contrastive lr must be positive, weight decay >= 0");
}

struct Batch {
  std::vector<std::size_t> indices;       // positions in the split
  std::vector<std::vector<int>> tokens;   // one prompt per sample, encoded
};

// One batch of n records without replacement, one prompt drawn uniformly per record.
inline Batch sample_batch(const std::vector<const corpus::SampleRecord*>& records, const corpus::Vocab& vocab,
                          std::size_t n, Rng& rng) {
  if (records.size() < n)
    throw ConfigError("sample_batch: split has " + std::to_string(records.size()) + " records, batch needs " +
                      std::to_string(n));
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n slots become the sample.
  for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + rng.below(order.size() - i)]);
  Batch b;
  b.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  for (auto idx : b.indices) {
    const auto& prompts = records[idx]->prompts;
    b.tokens.push_back(vocab.encode(prompts[rng.below(prompts.size())]));
  }
  return b;
}

// Splits one shuffled pass over the data into batches of n. A trailing
// single leftover joins the previous batch so every batch has >= 2 pairs and
// every record appears exactly once per epoch.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += n)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(count, start + n)));
  if (batches.size() > 1 && batches.back().size() < 2) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

struct ContrastiveResult {
  encoders::EncoderParams<float> image;
  encoders::EncoderParams<float> text;
  std::vector<double> epoch_loss;
};

inline ContrastiveResult train_contrastive(const corpus::LoadedSplit& train, const corpus::Vocab& vocab,
                                           const ContrastiveConfig& config,
                                           const encoders::EncoderConfig& image_config,
                                           const encoders::EncoderConfig& text_config) {
  using encoders::EncoderParams;
  validate(config);
  if (train.size() < config.batch_size)
    throw ConfigError("train_contrastive: training split smaller than one batch");
  if (text_config.vocab_size != vocab.size())
    throw ConfigError("train_contrastive: text encoder vocab size does not match the vocabulary");

  ContrastiveResult res{encoders::init_params<float>(image_config), encoders::init_params<float>(text_config), {}};
  OptimState<float> opt;
  opt.hyper.lr = config.lr;
  opt.hyper.weight_decay = config.weight_decay;
  Rng rng(config.seed);
  const auto tau = static_cast<float>(config.temperature);

  std::vector<Tensor<float>*> params;
  for (auto* t : res.image.tensors()) params.push_back(t);
  for (auto* t : res.text.tensors()) params.push_back(t);

  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0;
    std::size_t batches_seen = 0;
    for (const auto& idx : epoch_batches(train.size(), config.batch_size, rng)) {
      ++step;
      const std::size_t n = idx.size();
      const std::size_t d = image_config.d_out;
      std::vector<encoders::Activations<float>> img_acts, txt_acts;
      Tensor<float> u({n, d}), v({n, text_config.d_out});
      for (std::size_t i = 0; i < n; ++i) {
        const auto* rec = train.records[idx[i]];
        const auto tokens = vocab.encode(rec->prompts[rng.below(rec->prompts.size())]);
        img_acts.push_back(encoders::image_forward<float>(res.image, train.images[idx[i]]));
        txt_acts.push_back(encoders::text_forward<float>(res.text, tokens));
        std::copy(img_acts.back().out.data().begin(), img_acts.back().out.data().end(), u.row(i).begin());
        std::copy(txt_acts.back().out.data().begin(), txt_acts.back().out.data().end(), v.row(i).begin());
      }
      const auto loss = clip_loss(u, v, tau, config.symmetric);
      if (!std::isfinite(loss.loss))
        throw TrainingError("contrastive training diverged at step " + std::to_string(step));
      auto g_img = encoders::zeros_like(res.image);
      auto g_txt = encoders::zeros_like(res.text);
      for (std::size_t i = 0; i < n; ++i) {
        Tensor<float> gu({d}), gv({text_config.d_out});
        std::copy(loss.grad_u.row(i).begin(), loss.grad_u.row(i).end(), gu.data().begin());
        std::copy(loss.grad_v.row(i).begin(), loss.grad_v.row(i).end(), gv.data().begin());
        encoders::image_backward(res.image, img_acts[i], gu, g_img);
        encoders::text_backward(res.text, txt_acts[i], gv, g_txt);
      }
      std::vector<const Tensor<float>*> grads;
      for (const auto* t : std::as_const(g_img).tensors()) grads.push_back(t);
      for (const auto* t : std::as_const(g_txt).tensors()) grads.push_back(t);
      adamw_step<float>(params, grads, opt);
      total += loss.loss;
      ++batches_seen;
    }
    res.epoch_loss.push_back(total / static_cast<double>(batches_seen));
  }
  return res;
}

}  // namespace agriclip::contrastive
