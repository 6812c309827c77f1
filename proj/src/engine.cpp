#include "crsfl/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

namespace crsfl {

ClientRoundResult client_round(ClientState& state,
                               std::span<const double> applied_gradient,
                               bool first_round, bool delta_mode, double lr,
                               const Dataset& ds,
                               std::span<const std::uint32_t> shard,
                               std::uint32_t local_batch,
                               const SamplerConfig& sampler_cfg,
                               double laplace_scale, ModelKind model_kind,
                               std::uint32_t hidden, RngStream& rng) {
  if (shard.empty()) {
    throw std::invalid_argument("client_round: empty shard");
  }
  if (!first_round) {
    check_same_dim(state.weights.size(), applied_gradient.size(),
                   "client_round");
    axpy_inplace(state.weights, -lr, applied_gradient);
  }

  // One local epoch of minibatch steps on a scratch copy; the transmitted
  // gradient is the mean gradient along the local path, which reduces to
  // the plain shard gradient when the epoch is a single full batch.
  std::vector<std::uint32_t> order(shard.begin(), shard.end());
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  Model scratch;
  scratch.kind = model_kind;
  scratch.f = ds.f;
  scratch.h = model_kind == ModelKind::kMlp1 ? hidden : 0;
  scratch.c = ds.c;
  if (model_dim(model_kind, ds.f, hidden, ds.c) != state.weights.size()) {
    throw std::invalid_argument(
        "client_round: weight length does not match the model shape");
  }
  scratch.weights = state.weights;

  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t lo = 0; lo < order.size(); lo += local_batch) {
    std::size_t hi = std::min(order.size(),
                              lo + static_cast<std::size_t>(local_batch));
    auto [loss, grad] = loss_and_grad(
        scratch, ds, std::span<const std::uint32_t>(&order[lo], hi - lo));
    axpy_inplace(scratch.weights, -lr, grad);
    loss_sum += loss;
    ++batches;
  }
  double epoch_loss = loss_sum / static_cast<double>(batches);
  if (!std::isfinite(epoch_loss)) {
    throw std::runtime_error("client_round: non-finite loss");
  }

  GradientVector grad(state.weights.size());
  double scale = 1.0 / (lr * static_cast<double>(batches));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i] = (state.weights[i] - scratch.weights[i]) * scale;
  }

  GradientVector to_send;
  if (delta_mode) {
    if (state.sent_total.empty()) {
      state.sent_total.assign(grad.size(), 0.0);
    }
    to_send = grad;
    sub_inplace(to_send, state.sent_total);
  } else {
    to_send = grad;
  }
  if (laplace_scale > 0.0) {
    to_send = laplace_perturb(to_send, laplace_scale, rng);
  }

  ClientRoundResult result;
  result.update = sample(to_send, sampler_cfg, state.sampler_state, rng);
  result.epoch_loss = epoch_loss;

  if (delta_mode) {
    for (const SparseEntry& e : result.update.entries) {
      state.sent_total[e.index] += e.value;
    }
  }
  state.last_grad = std::move(grad);
  return result;
}

GradientVector fedavg_aggregate(const std::vector<SparseUpdate>& updates,
                                std::uint32_t m) {
  if (updates.empty()) {
    throw std::invalid_argument("fedavg_aggregate: empty update list");
  }
  if (m != updates.size()) {
    throw std::invalid_argument("fedavg_aggregate: m does not match the "
                                "number of updates");
  }
  std::uint32_t dim = updates.front().dim;
  GradientVector sum(dim, 0.0);
  for (const SparseUpdate& u : updates) {
    if (u.dim != dim) {
      throw std::invalid_argument("fedavg_aggregate: dimension mismatch");
    }
    validate(u);
    for (const SparseEntry& e : u.entries) sum[e.index] += e.value;
  }
  scale_inplace(sum, 1.0 / static_cast<double>(m));
  return sum;
}

namespace {

std::uint32_t worker_count(std::uint32_t m) {
  std::uint32_t threads = std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  if (const char* env = std::getenv("CRSFL_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) {
      threads = static_cast<std::uint32_t>(v);
    }
  }
  return std::min(threads, m);
}

struct BuiltData {
  Dataset train;
  Dataset test;
};

Dataset slice_dataset(const Dataset& ds, std::uint32_t lo, std::uint32_t hi) {
  Dataset out;
  out.f = ds.f;
  out.c = ds.c;
  out.n = hi - lo;
  out.features.assign(
      ds.features.begin() + static_cast<std::size_t>(lo) * ds.f,
      ds.features.begin() + static_cast<std::size_t>(hi) * ds.f);
  out.labels.assign(ds.labels.begin() + lo, ds.labels.begin() + hi);
  return out;
}

BuiltData build_data(const ExperimentConfig& cfg) {
  BuiltData out;
  if (cfg.dataset == DatasetKind::kSynth) {
    Dataset full = synth_classification(
        cfg.synth_n + cfg.synth_test_n, cfg.synth_features, cfg.synth_classes,
        cfg.synth_sep, static_cast<std::uint64_t>(cfg.seed));
    out.train = slice_dataset(full, 0, cfg.synth_n);
    out.test = slice_dataset(full, cfg.synth_n, full.n);
  } else {
    out.train = load_idx(cfg.idx_images, cfg.idx_labels);
    if (!cfg.idx_test_images.empty()) {
      out.test = load_idx(cfg.idx_test_images, cfg.idx_test_labels);
      out.test.c = std::max(out.test.c, out.train.c);
      out.train.c = out.test.c;
    } else {
      std::uint32_t cut = out.train.n - std::max(1u, out.train.n / 5);
      Dataset train = slice_dataset(out.train, 0, cut);
      out.test = slice_dataset(out.train, cut, out.train.n);
      out.train = std::move(train);
    }
  }
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  BuiltData data = build_data(cfg);
  const std::uint32_t m = cfg.clients;
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.seed);

  Partition part =
      cfg.partition == PartitionKind::kShards
          ? partition_shards(data.train, m, cfg.shards_per_client, seed,
                             cfg.min_samples)
          : partition_dirichlet(data.train, m, cfg.dirichlet_beta, seed,
                                cfg.min_samples);

  RngStream init_rng(seed, 0x696e6974ull /* "init" */);
  Model global = init_model(cfg.model, data.train.f, cfg.hidden,
                            data.train.c, init_rng);
  const std::uint32_t d = static_cast<std::uint32_t>(global.dim());

  SamplerConfig sampler_cfg;
  sampler_cfg.kind = cfg.sampler;
  sampler_cfg.k = cfg.k != 0
                      ? cfg.k
                      : static_cast<std::uint32_t>(std::ceil(
                            cfg.sampling_ratio * static_cast<double>(d)));
  sampler_cfg.p = cfg.p;
  sampler_cfg.feedback = cfg.feedback;
  sampler_cfg.epsilon = cfg.epsilon;
  sampler_cfg.crs_fixed_p_scaling = cfg.crs_fixed_p_scaling;

  RunResult result;
  result.model_dim = d;
  result.resolved_k = sampler_cfg.k;

  if (cfg.sampler == SamplerKind::kCrs) {
    if (sampler_cfg.p == 0.0) {
      sampler_cfg.p = max_sampling_probability(*cfg.epsilon);
    }
    result.certificate =
        issue_certificate(*cfg.epsilon, sampler_cfg.p, sampler_cfg.k, d);
    if (!result.certificate.issued) {
      throw CertificateRefused(result.certificate);
    }
  }
  validate_sampler_config(sampler_cfg, d);

  const bool delta_mode = cfg.engine == EngineMode::kDelta;
  std::vector<ClientState> clients(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    clients[i].client_id = i;
    clients[i].weights = global.weights;
  }

  ServerState server;
  GradientVector applied(d, 0.0);
  std::vector<SparseUpdate> inbox;  // updates received at the end of the
                                    // previous round
  double initial_loss = 0.0;
  const std::uint32_t threads = worker_count(m);

  for (std::uint32_t r = 0; r < cfg.rounds; ++r) {
    server.round = r;
    double lr_r = cfg.lr / (1.0 + cfg.lr_decay * static_cast<double>(r));

    if (r > 0) {
      server.global_update = fedavg_aggregate(inbox, m);
      if (delta_mode) {
        if (server.prev_global_grad.empty()) {
          server.prev_global_grad.assign(d, 0.0);
        }
        // G_g^r = G_g^{r-1} + delta; clients apply the same telescoped sum.
        add_inplace(server.prev_global_grad, server.global_update);
        applied = server.prev_global_grad;
      } else {
        applied = server.global_update;
      }
      axpy_inplace(global.weights, -lr_r, applied);
    }

    std::vector<ClientRoundResult> results(m);
    auto run_client = [&](std::uint32_t i) {
      RngStream rng(seed, static_cast<std::uint64_t>(i) + 1,
                    static_cast<std::uint64_t>(r) + 1);
      results[i] = client_round(
          clients[i], applied, r == 0, delta_mode, lr_r, data.train,
          part.assignments[i], cfg.local_batch, sampler_cfg,
          cfg.laplace_scale, cfg.model, cfg.hidden, rng);
    };
    if (threads <= 1) {
      for (std::uint32_t i = 0; i < m; ++i) run_client(i);
    } else {
      std::vector<std::thread> pool;
      std::atomic<std::uint32_t> next{0};
      for (std::uint32_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
          for (;;) {
            std::uint32_t i = next.fetch_add(1);
            if (i >= m) return;
            run_client(i);
          }
        });
      }
      for (std::thread& t : pool) t.join();
    }

    RoundMetrics row;
    row.round = r;
    row.m = m;
    row.download_bytes =
        static_cast<std::uint64_t>(m) * dense_broadcast_bytes(d);
    double loss_sum = 0.0;
    inbox.clear();
    inbox.reserve(m);
    for (std::uint32_t i = 0; i < m; ++i) {
      row.upload_bytes += payload_bytes(results[i].update);
      loss_sum += results[i].epoch_loss;
      inbox.push_back(std::move(results[i].update));
    }
    row.train_loss = loss_sum / static_cast<double>(m);
    if (r == 0) initial_loss = row.train_loss;
    if (!std::isfinite(row.train_loss)) {
      throw DivergenceError(r, "non-finite training loss");
    }
    if (r > 0 && row.train_loss > 10.0 * initial_loss) {
      throw DivergenceError(r, "loss exceeded 10x its initial value");
    }

    if (r % cfg.eval_every == 0 || r + 1 == cfg.rounds) {
      EvalResult eval = evaluate(global, data.test);
      row.eval_accuracy = eval.accuracy;
      row.eval_ce_loss = eval.ce_loss;
      result.final_accuracy = eval.accuracy;
    }
    result.history.push_back(std::move(row));
  }
  return result;
}

}  // namespace crsfl
