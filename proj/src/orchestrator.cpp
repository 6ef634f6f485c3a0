#include "vmask/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "vmask/checkpoint.hpp"
#include "vmask/masking.hpp"
#include "vmask/secure_train.hpp"
#include "vmask/transport.hpp"

namespace vmask {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Dataset load_base_dataset(const RunConfig& cfg) {
  switch (cfg.dataset.kind) {
    case DatasetKind::Digits: {
      const std::string path =
          cfg.dataset.path.empty() ? "data/digits.csv" : cfg.dataset.path;
      return load_csv(path, cfg.dataset.label_column);
    }
    case DatasetKind::Csv:
      return load_csv(cfg.dataset.path, cfg.dataset.label_column);
    case DatasetKind::Blobs: {
      Rng rng = Rng::derive(cfg.seed, Stream::Blob, {});
      return make_blobs(cfg.dataset.blob_features, cfg.dataset.blob_classes,
                        cfg.dataset.blob_samples, rng);
    }
  }
  throw std::logic_error("unreachable dataset kind");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Tensor bytes_to_tensor(const std::vector<std::uint8_t>& b) {
  return tensor_from_bytes(b.data(), b.size());
}

std::uint64_t fold_string(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ----------------------------------------------------------- party state

struct PassiveParty {
  std::size_t id = 1;  // 1-based; the active party is cfg.parties
  Model bottom;
  ShareStore store;
  MaskState mask;
  std::shared_ptr<Channel> ch;
  TripleStore triples;
  Tensor train_block;
};

struct EpochPlanLocal {
  std::size_t epoch = 1;
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> u_next;
  ShareDomain domain;
  double sigma = 0.0;
  double lr = 0.1;
  std::uint64_t seed = 0;
};

std::uint64_t batch_tag(std::size_t epoch, std::size_t b) {
  return (static_cast<std::uint64_t>(epoch) << 24) |
         static_cast<std::uint64_t>(b);
}

// One passive party's epoch: transition into the planned mask set, then the
// batched forward/backward with plaintext layers computed locally and masked
// layers run through the two-party protocol.
void passive_epoch(PassiveParty& p, const EpochPlanLocal& plan) {
  MaskingConfig mcfg{plan.domain, plan.sigma};
  Rng mask_rng = Rng::derive(plan.seed, Stream::ShareMask, {p.id, plan.epoch});
  mask_transition_passive(p.bottom, p.store, p.mask, plan.u_next, mcfg,
                          mask_rng, *p.ch, p.id);

  Rng data_rng = Rng::derive(plan.seed, Stream::ShareData, {p.id, plan.epoch});
  SecureLayerCtx ctx{plan.domain, plan.lr,   p.id,
                     p.ch.get(),  &p.triples, &p.store,
                     &data_rng};
  const std::size_t L = p.bottom.depth();
  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    try {
      const std::uint64_t tag = batch_tag(plan.epoch, b);
      SharedCache scache;
      std::vector<Tensor> inputs(L), preacts(L);
      Tensor z = take_rows(p.train_block, plan.batches[b]);
      for (std::size_t j = 1; j <= L; ++j) {
        inputs[j - 1] = z;
        Tensor pre = p.mask.is_masked(j)
                         ? secure_fc_forward_passive(ctx, j, z, scache, tag)
                         : fc_forward(p.bottom.layers[j - 1], z);
        preacts[j - 1] = pre;
        z = (j < L) ? relu(pre) : std::move(pre);
      }
      p.ch->send({MsgKind::Embedding, p.id, b, plan.epoch, tensor_to_bytes(z)});

      Message m = p.ch->recv();
      if (m.kind != MsgKind::EmbeddingGrad || m.tag != b ||
          m.step != plan.epoch)
        throw std::runtime_error("unexpected message while awaiting gradient");
      Tensor g = bytes_to_tensor(m.payload);
      for (std::size_t j = L; j >= 1; --j) {
        Tensor gpre =
            (j < L) ? relu_backward(preacts[j - 1], g) : std::move(g);
        if (p.mask.is_masked(j)) {
          g = secure_fc_backward_passive(ctx, j, gpre, scache, tag);
        } else {
          FcGrads fg = fc_backward(p.bottom.layers[j - 1], inputs[j - 1], gpre);
          g = std::move(fg.input);
          sgd_step(p.bottom.layers[j - 1],
                   LayerGrad{std::move(fg.weight), std::move(fg.bias)},
                   plan.lr);
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("batch " + std::to_string(b) + ": " + e.what());
    }
  }
  if (p.triples.remaining() != 0)
    throw std::runtime_error("triple budget miscount: " +
                             std::to_string(p.triples.remaining()) +
                             " triples left after the epoch");
}

Message expect_kind(Channel& ch, MsgKind kind, std::uint64_t tag,
                    std::uint64_t step, const char* what) {
  Message m = ch.recv();
  if (m.kind != kind || m.tag != tag || m.step != step)
    throw std::runtime_error(std::string("unexpected message while awaiting ") +
                             what);
  return m;
}

double joint_test_accuracy(const std::vector<Model>& passive_effective,
                           const Model& active_bottom, const Model& top,
                           const std::vector<Tensor>& parts,
                           const std::vector<int>& y, Tensor* out_z = nullptr) {
  Tensor z_sum;
  for (std::size_t k = 0; k < passive_effective.size(); ++k) {
    Tensor z = model_forward(passive_effective[k], parts[k]).output;
    z_sum = (k == 0) ? std::move(z) : add(z_sum, z);
  }
  z_sum = add(z_sum, model_forward(active_bottom, parts.back()).output);
  if (out_z) *out_z = z_sum;
  return accuracy(model_forward(top, z_sum).output, y);
}

AttackRunInfo attack_bottom(const RunConfig& cfg, const PreparedData& data,
                            const Model& bottom, const std::string& mode,
                            std::size_t party) {
  if (party == 0 || party >= cfg.parties)
    throw std::invalid_argument("attack party must be a passive party");
  if (bottom.layers.front().in_dim() != data.vsplit.width[party - 1])
    throw std::invalid_argument(
        "checkpoint input width does not match party " +
        std::to_string(party) + "'s feature block");
  // The pool and the few-shot split depend only on (seed, party) so attack
  // numbers stay comparable across modes and checkpoints of one experiment.
  Rng data_rng = Rng::derive(cfg.seed, Stream::Attack, {party, 0});
  AttackDataset ds = build_attack_dataset(
      data.train_parts[party - 1], data.train_y, data.num_classes,
      cfg.attack.labels_per_class, 1.0, data_rng);
  Rng head_rng =
      Rng::derive(cfg.seed, Stream::Attack, {party, 1, fold_string(mode)});
  AttackResult r = mc_attack(ds, bottom, cfg.model.head_hidden,
                             cfg.attack.epochs, cfg.attack.lr, head_rng);
  return AttackRunInfo{mode, party, r.best, std::move(r.per_epoch)};
}

void append_row(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
}

}  // namespace

std::string format_index_set(const std::vector<std::size_t>& u) {
  std::string s;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(u[i]);
  }
  return s;
}

PreparedData prepare_data(const RunConfig& cfg) {
  Dataset base = load_base_dataset(cfg);
  if (base.dim() < cfg.parties)
    throw std::invalid_argument("feature dimension smaller than party count");

  Rng split_rng = Rng::derive(cfg.seed, Stream::Split, {});
  TrainTest tt = split_train_test(base, cfg.dataset.test_fraction, split_rng);
  Standardizer st = fit_standardizer(tt.train.features);
  Tensor train_x = apply_standardizer(st, tt.train.features);
  Tensor test_x = apply_standardizer(st, tt.test.features);

  PreparedData out;
  out.train_y = tt.train.labels;
  out.test_y = tt.test.labels;
  out.num_classes = base.num_classes;
  out.vsplit = vertical_split(base.dim(), cfg.parties);
  for (std::size_t k = 0; k < cfg.parties; ++k) {
    out.train_parts.push_back(
        slice_cols(train_x, out.vsplit.offset[k], out.vsplit.width[k]));
    out.test_parts.push_back(
        slice_cols(test_x, out.vsplit.offset[k], out.vsplit.width[k]));
  }

  // Active party's auxiliary sample: stratified so the simulated attacks can
  // always draw their per-class few-shot split.
  Rng aux_rng = Rng::derive(cfg.seed, Stream::AuxSample, {});
  std::vector<std::size_t> idx =
      stratified_sample(out.train_y, out.num_classes, cfg.defense.aux_ratio,
                        cfg.attack.labels_per_class + 1, aux_rng);
  if (cfg.defense.aux_label_classes > 0 &&
      cfg.defense.aux_label_classes < out.num_classes) {
    std::vector<std::size_t> kept;
    for (std::size_t i : idx)
      if (static_cast<std::size_t>(out.train_y[i]) <
          cfg.defense.aux_label_classes)
        kept.push_back(i);
    idx = std::move(kept);
  }
  out.aux.labels = take_at(out.train_y, idx);
  out.aux.num_classes = out.num_classes;
  for (std::size_t k = 1; k < cfg.parties; ++k) {
    Tensor block = take_rows(out.train_parts[k - 1], idx);
    if (cfg.defense.aux_noise_std > 0.0) {
      Rng noise = Rng::derive(cfg.seed, Stream::AuxNoise, {k});
      for (double& v : block.data)
        v += noise.normal(0.0, cfg.defense.aux_noise_std);
    }
    out.aux.per_party.push_back(std::move(block));
  }
  return out;
}

RunReport run_training(const RunConfig& cfg, const RunOptions& opt) {
  const Variant variant = variant_from_name(cfg.defense.variant);
  const bool vmask_mode = variant != Variant::Vanilla;
  const std::size_t P = cfg.parties - 1;
  const PreparedData data = prepare_data(cfg);
  const std::size_t C = data.num_classes;
  const std::size_t n_train = data.train_y.size();
  const std::size_t L = cfg.model.bottom_hidden.size() + 1;

  RunReport report;

  // Security audit is advisory: verdicts are logged, training proceeds.
  {
    std::vector<std::vector<std::size_t>> widths(P);
    for (std::size_t k = 1; k <= P; ++k) {
      std::vector<std::size_t> dims = cfg.bottom_dims(data.vsplit.width[k - 1]);
      widths[k - 1].assign(dims.begin(), dims.end() - 1);
    }
    report.audit = audit_layers(cfg.train.batch, widths);
  }

  // Party setup. Physical co-location in one process is an artifact of the
  // harness; all cross-party training traffic flows through the channels.
  std::vector<PassiveParty> parties(P);
  std::vector<std::shared_ptr<Channel>> active_chs(P);
  for (std::size_t k = 1; k <= P; ++k) {
    PassiveParty& p = parties[k - 1];
    p.id = k;
    Rng init = Rng::derive(cfg.seed, Stream::Init, {k});
    p.bottom = init_model(ModelRole::Bottom,
                          cfg.bottom_dims(data.vsplit.width[k - 1]), init);
    p.mask.depth = L;
    p.train_block = data.train_parts[k - 1];
    ChannelPair pair = make_channel_pair(cfg.transport);
    p.ch = pair.a;
    active_chs[k - 1] = pair.b;
  }
  Rng init_own = Rng::derive(cfg.seed, Stream::Init, {cfg.parties});
  Model active_bottom = init_model(
      ModelRole::Bottom, cfg.bottom_dims(data.vsplit.width[P]), init_own);
  Rng init_top = Rng::derive(cfg.seed, Stream::InitTop, {});
  std::vector<std::size_t> top_dims{cfg.model.embedding};
  top_dims.insert(top_dims.end(), cfg.model.top_hidden.begin(),
                  cfg.model.top_hidden.end());
  top_dims.push_back(C);
  Model top = init_model(ModelRole::Top, top_dims, init_top);

  std::vector<Model> shadows;
  std::vector<std::vector<double>> grad_norms(P, std::vector<double>(L, 0.0));
  if (vmask_mode)
    for (std::size_t k = 1; k <= P; ++k)
      shadows.push_back(init_seed_matched_shadow(
          cfg.seed, k, cfg.bottom_dims(data.vsplit.width[k - 1])));

  std::vector<ShareStore> active_stores(P);
  std::vector<MaskState> active_mask(P);
  for (auto& m : active_mask) m.depth = L;
  std::vector<TripleStore> active_triples(P);

  // Epoch-1 masked set is fixed to {1}; selection only steers later epochs.
  std::vector<std::vector<std::size_t>> u_next(P);
  if (vmask_mode) {
    std::vector<std::size_t> rest;
    for (std::size_t j = 2; j <= L; ++j) rest.push_back(j);
    for (std::size_t k = 1; k <= P; ++k) {
      u_next[k - 1] = {1};
      report.selections.push_back(SelectionRow{
          1, k, cfg.defense.variant, {1}, rest, kNaN, cfg.defense.budget, 0});
    }
  }

  const MaskingConfig mcfg{cfg.domain, cfg.defense.sigma};
  std::vector<double> last_est(P, kNaN);
  std::size_t masked_epoch_sum = 0;
  std::vector<std::vector<Model>> views_by_epoch;  // attack_every_epoch only

  // Runs one barrier phase: spawns the passive threads on `passive_fn`,
  // runs `active_fn` on this thread, joins, and rethrows the first failure
  // with party context attached.
  auto run_phase = [&](std::size_t epoch,
                       const std::function<void(std::size_t)>& passive_fn,
                       const std::function<void()>& active_fn) {
    std::vector<std::exception_ptr> errs(P);
    std::exception_ptr active_err;
    std::vector<std::thread> threads;
    threads.reserve(P);
    for (std::size_t k = 1; k <= P; ++k) {
      threads.emplace_back([&, k] {
        try {
          passive_fn(k);
        } catch (...) {
          errs[k - 1] = std::current_exception();
          parties[k - 1].ch->close();
        }
      });
    }
    try {
      active_fn();
    } catch (...) {
      active_err = std::current_exception();
      for (auto& ch : active_chs) ch->close();
    }
    for (auto& t : threads) t.join();

    // A crash on one side makes the other fail with a channel-close cascade;
    // report the root cause, not the cascade.
    std::vector<std::pair<std::string, std::string>> failures;  // who, what
    for (std::size_t k = 1; k <= P; ++k) {
      if (!errs[k - 1]) continue;
      try {
        std::rethrow_exception(errs[k - 1]);
      } catch (const std::exception& e) {
        failures.emplace_back("party " + std::to_string(k), e.what());
      }
    }
    if (active_err) {
      try {
        std::rethrow_exception(active_err);
      } catch (const std::exception& e) {
        failures.emplace_back("active party", e.what());
      }
    }
    if (!failures.empty()) {
      const auto* chosen = &failures.front();
      for (const auto& f : failures)
        if (f.second.find("closed channel") == std::string::npos) {
          chosen = &f;
          break;
        }
      throw std::runtime_error(chosen->first + " failed in epoch " +
                               std::to_string(epoch) + ": " + chosen->second);
    }
  };

  for (std::size_t t = 1; t <= cfg.train.epochs; ++t) {
    const auto wall_start = std::chrono::steady_clock::now();

    Rng order_rng = Rng::derive(cfg.seed, Stream::BatchOrder, {t});
    const std::vector<std::vector<std::size_t>> batches =
        make_batches(n_train, cfg.train.batch, order_rng);
    std::vector<std::size_t> batch_sizes;
    for (const auto& b : batches) batch_sizes.push_back(b.size());

    // Trusted dealer: the epoch's full triple supply, split into halves.
    for (std::size_t k = 1; k <= P; ++k) {
      Rng trng = Rng::derive(cfg.seed, Stream::Triple, {k, t});
      EpochTriples et = deal_epoch_triples(
          u_next[k - 1], cfg.bottom_dims(data.vsplit.width[k - 1]),
          batch_sizes, cfg.domain, trng);
      parties[k - 1].triples = std::move(et.passive);
      active_triples[k - 1] = std::move(et.active);
    }

    EpochPlanLocal plan;
    plan.epoch = t;
    plan.batches = batches;
    plan.domain = cfg.domain;
    plan.sigma = cfg.defense.sigma;
    plan.lr = cfg.train.lr;
    plan.seed = cfg.seed;

    double loss_sum = 0.0, correct_sum = 0.0;

    run_phase(
        t,
        [&](std::size_t k) {
          EpochPlanLocal local = plan;
          local.u_next = u_next[k - 1];
          passive_epoch(parties[k - 1], local);
        },
        [&] {
          for (std::size_t k = 1; k <= P; ++k) {
            Rng noise = Rng::derive(cfg.seed, Stream::MaskNoise, {k, t});
            mask_transition_active(active_stores[k - 1], active_mask[k - 1],
                                   u_next[k - 1], mcfg, noise,
                                   *active_chs[k - 1], k);
            active_mask[k - 1].masked = u_next[k - 1];
          }
          std::vector<SecureLayerCtx> actx(P);
          std::vector<SharedCache> scache(P);
          for (std::size_t k = 1; k <= P; ++k)
            actx[k - 1] =
                SecureLayerCtx{cfg.domain,          cfg.train.lr,
                               cfg.parties,         active_chs[k - 1].get(),
                               &active_triples[k - 1], &active_stores[k - 1],
                               nullptr};
          for (std::size_t b = 0; b < batches.size(); ++b) {
            try {
              const std::uint64_t tag = batch_tag(t, b);
              const std::vector<int> yb = take_at(data.train_y, batches[b]);
              Tensor z_sum;
              for (std::size_t k = 1; k <= P; ++k) {
                for (std::size_t j : active_mask[k - 1].masked)
                  secure_fc_forward_active(actx[k - 1], j, scache[k - 1], tag);
                Message m = expect_kind(*active_chs[k - 1], MsgKind::Embedding,
                                        b, t, "an embedding");
                Tensor z = bytes_to_tensor(m.payload);
                z_sum = (k == 1) ? std::move(z) : add(z_sum, z);
              }
              ForwardCache own = model_forward(
                  active_bottom, take_rows(data.train_parts[P], batches[b]));
              z_sum = add(z_sum, own.output);
              ForwardCache tc = model_forward(top, z_sum);
              CeResult ce = softmax_ce(tc.output, yb);
              loss_sum += ce.loss * double(yb.size());
              correct_sum += accuracy(tc.output, yb) * double(yb.size());

              BackwardResult br = model_backward(top, tc, ce.grad);
              for (std::size_t k = 1; k <= P; ++k)
                active_chs[k - 1]->send({MsgKind::EmbeddingGrad, cfg.parties,
                                         b, t,
                                         tensor_to_bytes(br.grad_input)});
              for (std::size_t k = 1; k <= P; ++k) {
                const auto& masked = active_mask[k - 1].masked;
                for (auto it = masked.rbegin(); it != masked.rend(); ++it)
                  secure_fc_backward_active(actx[k - 1], *it, scache[k - 1],
                                            tag);
              }
              sgd_step(top, br.grads, cfg.train.lr);
              BackwardResult ob =
                  model_backward(active_bottom, own, br.grad_input);
              sgd_step(active_bottom, ob.grads, cfg.train.lr);
            } catch (const std::exception& e) {
              throw std::runtime_error("batch " + std::to_string(b) + ": " +
                                       e.what());
            }
          }
          for (std::size_t k = 1; k <= P; ++k)
            if (active_triples[k - 1].remaining() != 0)
              throw std::runtime_error("triple budget miscount on the active "
                                       "side");
        });

    // Epoch-end observability: true joint accuracy and the adversary's view.
    std::vector<Model> effective(P);
    for (std::size_t k = 1; k <= P; ++k)
      effective[k - 1] =
          materialize_effective(parties[k - 1].bottom, parties[k - 1].store,
                                active_stores[k - 1]);
    Tensor z_embed;
    const bool want_embed = opt.dump_embeddings && t == cfg.train.epochs;
    const double test_acc = joint_test_accuracy(
        effective, active_bottom, top, data.test_parts, data.test_y,
        want_embed ? &z_embed : nullptr);
    if (want_embed) {
      report.final_test_embeddings = std::move(z_embed);
      report.test_labels = data.test_y;
    }

    std::vector<Model> epoch_views(P);
    for (std::size_t k = 1; k <= P; ++k)
      epoch_views[k - 1] = materialize_attacker_view(parties[k - 1].bottom);
    if (report.best_epoch == 0 || test_acc > report.best_test_acc) {
      report.best_epoch = t;
      report.best_test_acc = test_acc;
      report.attacker_best = epoch_views;
      report.effective_best = effective;
      report.top_best = top;
    }
    if (opt.attack_every_epoch) views_by_epoch.push_back(epoch_views);

    for (std::size_t k = 1; k <= P; ++k)
      masked_epoch_sum += active_mask[k - 1].masked.size();

    // Shadow pass and next epoch's selection (Alg. 6 order: after training).
    if (vmask_mode) {
      Rng shadow_rng = Rng::derive(cfg.seed, Stream::AuxSample, {t});
      ShadowUpdateResult sres = shadow_model_update(
          shadows, top, data.aux, cfg.train.batch, cfg.train.lr, shadow_rng);
      for (std::size_t k = 1; k <= P; ++k)
        accumulate_grad_norms(grad_norms[k - 1], sres.grads[k - 1]);

      SelectConfig scfg;
      scfg.budget = cfg.defense.budget;
      scfg.variant = variant;
      scfg.m_per_class = cfg.attack.labels_per_class;
      scfg.attack_epochs = cfg.defense.sim_attack_epochs;
      scfg.attack_lr = cfg.attack.lr;
      scfg.head_hidden = cfg.model.head_hidden;
      for (std::size_t k = 1; k <= P; ++k) {
        Rng sim_rng = Rng::derive(cfg.seed, Stream::SimAttack, {k, t});
        Rng att_rng = Rng::derive(cfg.seed, Stream::Select, {k, t});
        SelectResult sr = select_layers(
            shadows[k - 1], data.aux.per_party[k - 1], data.aux.labels, C,
            active_mask[k - 1].masked, grad_norms[k - 1], scfg, sim_rng,
            att_rng);
        u_next[k - 1] = sr.u_next;
        last_est[k - 1] = sr.est_attack_acc;
        report.selections.push_back(SelectionRow{
            t + 1, k, cfg.defense.variant, sr.u_next, sr.v_next,
            sr.est_attack_acc, cfg.defense.budget, sr.attacks_run});
      }
    }

    EpochMetrics em;
    em.epoch = t;
    em.loss = loss_sum / double(n_train);
    em.train_acc = correct_sum / double(n_train);
    em.test_acc = test_acc;
    for (std::size_t k = 1; k <= P; ++k)
      em.u_per_party.push_back(active_mask[k - 1].masked);
    em.est_eps = last_est;
    em.mask_ratio =
        double(masked_epoch_sum) / (double(t) * double(L) * double(P));
    em.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      wall_start)
            .count();
    report.epochs.push_back(std::move(em));
  }

  report.final_test_acc = report.epochs.back().test_acc;
  report.mask_ratio = report.epochs.back().mask_ratio;

  // Trailing transition into the last selected set, completing the loop's
  // bookkeeping; the model then rests in its deployed masking state.
  if (vmask_mode) {
    const std::size_t t_final = cfg.train.epochs + 1;
    run_phase(
        t_final,
        [&](std::size_t k) {
          Rng mask_rng =
              Rng::derive(cfg.seed, Stream::ShareMask, {k, t_final});
          mask_transition_passive(parties[k - 1].bottom, parties[k - 1].store,
                                  parties[k - 1].mask, u_next[k - 1], mcfg,
                                  mask_rng, *parties[k - 1].ch, k);
        },
        [&] {
          for (std::size_t k = 1; k <= P; ++k) {
            Rng noise =
                Rng::derive(cfg.seed, Stream::MaskNoise, {k, t_final});
            mask_transition_active(active_stores[k - 1], active_mask[k - 1],
                                   u_next[k - 1], mcfg, noise,
                                   *active_chs[k - 1], k);
            active_mask[k - 1].masked = u_next[k - 1];
          }
        });
  }

  for (std::size_t k = 1; k <= P; ++k) {
    report.attacker_final.push_back(
        materialize_attacker_view(parties[k - 1].bottom));
    report.effective_final.push_back(
        materialize_effective(parties[k - 1].bottom, parties[k - 1].store,
                              active_stores[k - 1]));
  }
  report.top_final = top;
  report.own_bottom_final = active_bottom;
  if (report.best_epoch == 0) {
    report.attacker_best = report.attacker_final;
    report.effective_best = report.effective_final;
    report.top_best = top;
  }

  // Adversarial evaluation of what a passive party actually holds.
  const std::string& mode = cfg.defense.variant;
  for (std::size_t k = 1; k <= P; ++k) {
    report.attacks.push_back(attack_bottom(cfg, data, report.attacker_best[k - 1],
                                           mode + "-best", k));
    report.attacks.push_back(attack_bottom(
        cfg, data, report.attacker_final[k - 1], mode + "-final", k));
    if (opt.attack_every_epoch)
      for (std::size_t t = 1; t <= views_by_epoch.size(); ++t)
        report.attacks.push_back(
            attack_bottom(cfg, data, views_by_epoch[t - 1][k - 1],
                          mode + "-e" + std::to_string(t), k));
  }

  for (auto& ch : active_chs) ch->close();
  for (auto& p : parties) p.ch->close();
  return report;
}

RunReport run_scratch_baseline(const RunConfig& cfg) {
  const PreparedData data = prepare_data(cfg);
  RunReport report;
  for (std::size_t k = 1; k < cfg.parties; ++k) {
    Rng init = Rng::derive(cfg.seed, Stream::Init, {k});
    Model bottom = init_model(ModelRole::Bottom,
                              cfg.bottom_dims(data.vsplit.width[k - 1]), init);
    report.attacker_final.push_back(materialize_attacker_view(bottom));
    report.attacks.push_back(
        attack_bottom(cfg, data, report.attacker_final.back(), "scratch", k));
  }
  return report;
}

AttackRunInfo run_attack_on_model(const RunConfig& cfg, const Model& bottom,
                                  const std::string& mode_label,
                                  std::size_t party) {
  const PreparedData data = prepare_data(cfg);
  return attack_bottom(cfg, data, bottom, mode_label, party);
}

std::vector<SweepRow> sweep_budget(const RunConfig& cfg,
                                   const std::vector<double>& budgets) {
  for (std::size_t i = 1; i < budgets.size(); ++i)
    if (!(budgets[i] < budgets[i - 1]))
      throw std::invalid_argument("budgets must be strictly descending");
  std::vector<SweepRow> rows;
  for (double b : budgets) {
    RunConfig c = cfg;
    c.defense.budget = b;
    RunReport r = run_training(c);
    SweepRow row;
    row.budget = b;
    row.main_acc = r.best_test_acc;
    row.mask_ratio = r.mask_ratio;
    const std::string want = c.defense.variant + "-final";
    for (const AttackRunInfo& a : r.attacks)
      if (a.mode == want && a.party == 1) row.attack_acc = a.best;
    rows.push_back(row);
  }
  return rows;
}

void write_report_files(const RunConfig& cfg, const RunReport& report,
                        const RunOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);
  const std::size_t P = cfg.parties - 1;

  {
    std::string csv;
    std::vector<std::string> hdr{"epoch", "loss", "train_acc", "test_acc"};
    for (std::size_t k = 1; k <= P; ++k) {
      hdr.push_back("u_party" + std::to_string(k));
      hdr.push_back("est_eps_party" + std::to_string(k));
    }
    hdr.push_back("mask_ratio");
    append_row(csv, hdr);
    for (const EpochMetrics& em : report.epochs) {
      std::vector<std::string> row{std::to_string(em.epoch),
                                   fmt_double(em.loss),
                                   fmt_double(em.train_acc),
                                   fmt_double(em.test_acc)};
      for (std::size_t k = 1; k <= P; ++k) {
        row.push_back(format_index_set(em.u_per_party[k - 1]));
        row.push_back(fmt_double(em.est_eps[k - 1]));
      }
      row.push_back(fmt_double(em.mask_ratio));
      append_row(csv, row);
    }
    std::ofstream(dir / "metrics.csv", std::ios::binary) << csv;
  }
  {
    std::string csv;
    append_row(csv, {"epoch", "party", "variant", "u", "v", "est_eps",
                     "budget", "attacks_run"});
    for (const SelectionRow& s : report.selections)
      append_row(csv, {std::to_string(s.epoch), std::to_string(s.party),
                       s.variant, format_index_set(s.u), format_index_set(s.v),
                       fmt_double(s.est_eps), fmt_double(s.budget),
                       std::to_string(s.attacks_run)});
    std::ofstream(dir / "selection.csv", std::ios::binary) << csv;
  }
  {
    std::string csv;
    append_row(csv, {"seed", "mode", "party", "m_per_class", "attack_epochs",
                     "epoch", "test_acc", "best"});
    for (const AttackRunInfo& a : report.attacks)
      for (std::size_t e = 1; e <= a.per_epoch.size(); ++e)
        append_row(csv,
                   {std::to_string(cfg.seed), a.mode, std::to_string(a.party),
                    std::to_string(cfg.attack.labels_per_class),
                    std::to_string(cfg.attack.epochs), std::to_string(e),
                    fmt_double(a.per_epoch[e - 1]), fmt_double(a.best)});
    std::ofstream(dir / "attack.csv", std::ios::binary) << csv;
  }
  {
    std::string csv;
    append_row(csv, {"epoch", "wall_seconds"});
    double total = 0.0;
    for (const EpochMetrics& em : report.epochs) {
      total += em.wall_seconds;
      append_row(csv,
                 {std::to_string(em.epoch), fmt_double(em.wall_seconds)});
    }
    append_row(csv, {"total", fmt_double(total)});
    std::ofstream(dir / "timing.csv", std::ios::binary) << csv;
  }
  std::ofstream(dir / "config.json", std::ios::binary) << config_to_json(cfg);

  for (std::size_t k = 1; k <= P && k <= report.attacker_best.size(); ++k) {
    save_model((dir / ("attacker_best_party" + std::to_string(k) + ".bin"))
                   .string(),
               report.attacker_best[k - 1]);
    save_model((dir / ("attacker_final_party" + std::to_string(k) + ".bin"))
                   .string(),
               report.attacker_final[k - 1]);
    save_model(
        (dir / ("bottom_best_party" + std::to_string(k) + ".bin")).string(),
        report.effective_best[k - 1]);
    save_model(
        (dir / ("bottom_final_party" + std::to_string(k) + ".bin")).string(),
        report.effective_final[k - 1]);
  }
  if (!report.epochs.empty()) {
    save_model((dir / "top_best.bin").string(), report.top_best);
    save_model((dir / "top_final.bin").string(), report.top_final);
  }

  if (opt.dump_embeddings && report.final_test_embeddings.rank() == 2) {
    std::string csv;
    const Tensor& z = report.final_test_embeddings;
    std::vector<std::string> hdr;
    for (std::size_t j = 0; j < z.cols(); ++j)
      hdr.push_back("z" + std::to_string(j));
    hdr.push_back("label");
    append_row(csv, hdr);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      std::vector<std::string> row;
      for (std::size_t j = 0; j < z.cols(); ++j)
        row.push_back(fmt_double(z.at(i, j)));
      row.push_back(std::to_string(report.test_labels[i]));
      append_row(csv, row);
    }
    std::ofstream(dir / "embeddings.csv", std::ios::binary) << csv;
  }
}

void write_sweep_files(const RunConfig& cfg,
                       const std::vector<SweepRow>& rows) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  std::string csv;
  append_row(csv, {"budget", "attack_acc", "main_acc", "mask_ratio"});
  for (const SweepRow& r : rows)
    append_row(csv, {fmt_double(r.budget), fmt_double(r.attack_acc),
                     fmt_double(r.main_acc), fmt_double(r.mask_ratio)});
  std::ofstream(fs::path(cfg.out_dir) / "sweep.csv", std::ios::binary) << csv;
}

}  // namespace vmask
