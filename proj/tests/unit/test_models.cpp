#include "spdregime/error.hpp"
#include "spdregime/models/checkpoint.hpp"
#include "spdregime/models/config.hpp"
#include "spdregime/models/spdnet.hpp"
#include "spdregime/models/training.hpp"
#include "spdregime/models/uspdnet.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace spdregime {
namespace {

using namespace models;

ModelConfig small(ModelKind kind, std::vector<int> tmd, std::uint64_t seed = 7) {
  ModelConfig c = ModelConfig::preset(kind);
  c.tmd = std::move(tmd);
  c.seed = seed;
  return c;
}

/// Class c puts extra variance on coordinate c.
LabeledSet toy_set(int n_per_class, int dim, std::mt19937_64& rng) {
  LabeledSet s;
  for (int c = 0; c < kNumClasses; ++c)
    for (int k = 0; k < n_per_class; ++k) {
      const Matrix a = test::gaussian(dim, 3 * dim, rng);
      Matrix cov = a * a.transpose() / (3.0 * dim);
      cov.row(c) *= 2.0;
      cov.col(c) *= 2.0;
      s.inputs.emplace_back(SymMatrix(cov + 0.1 * Matrix::Identity(dim, dim)));
      s.labels.push_back(c);
    }
  return s;
}

TEST(ModelConfig, PresetsMatchReferenceTable) {
  const auto spdnet = ModelConfig::preset(ModelKind::SPDNet);
  EXPECT_EQ(spdnet.tmd, (std::vector<int>{60, 20, 3}));
  EXPECT_DOUBLE_EQ(spdnet.lr_start, 1e-3);
  EXPECT_FALSE(spdnet.use_rbn);
  const auto bn = ModelConfig::preset(ModelKind::SPDNetBN);
  EXPECT_EQ(bn.tmd, (std::vector<int>{60, 20, 3}));
  EXPECT_TRUE(bn.use_rbn);
  for (auto kind : {ModelKind::SPDNet3BiRe, ModelKind::SPDNetBN3BiRe}) {
    const auto c = ModelConfig::preset(kind);
    EXPECT_EQ(c.tmd, (std::vector<int>{60, 40, 20, 10, 3}));
    EXPECT_DOUBLE_EQ(c.lr_start, 1e-4);
    EXPECT_FALSE(c.annealed());
  }
  const auto u = ModelConfig::preset(ModelKind::USPDNet6BiRe);
  EXPECT_EQ(u.tmd, (std::vector<int>{60, 40, 20, 10, 3}));
  EXPECT_DOUBLE_EQ(u.lr_start, 1e-2);
  EXPECT_DOUBLE_EQ(u.lr_end, 1e-5);
  for (auto kind : {ModelKind::SPDNet, ModelKind::SPDNetBN, ModelKind::SPDNet3BiRe,
                    ModelKind::SPDNetBN3BiRe, ModelKind::USPDNet6BiRe}) {
    EXPECT_EQ(parse_model_kind(to_string(kind)), kind);
    EXPECT_NO_THROW(ModelConfig::preset(kind).validate());
  }
  EXPECT_THROW(parse_model_kind("ResNet"), ConfigError);
}

TEST(ModelConfig, LearningRateAnnealsGeometrically) {
  ModelConfig c = ModelConfig::preset(ModelKind::USPDNet6BiRe);
  c.epochs = 100;
  EXPECT_NEAR(learning_rate_at(c, 1), 1e-2, 1e-15);
  EXPECT_NEAR(learning_rate_at(c, 100), 1e-5, 1e-18);
  for (int e = 2; e < 100; ++e) {
    const double r1 = learning_rate_at(c, e) / learning_rate_at(c, e - 1);
    const double r2 = learning_rate_at(c, e + 1) / learning_rate_at(c, e);
    EXPECT_NEAR(r1, r2, 1e-12);
    EXPECT_LT(r1, 1.0);
  }
  const ModelConfig flat = ModelConfig::preset(ModelKind::SPDNet);
  EXPECT_EQ(learning_rate_at(flat, 1), learning_rate_at(flat, 599));
}

TEST(ModelConfig, JsonRoundTripAndErrors) {
  ModelConfig c = small(ModelKind::USPDNet6BiRe, {10, 8, 6, 4, 3}, 99);
  c.epochs = 12;
  c.skip_combine_weight = 0.25;
  const ModelConfig back = model_config_from_json(model_config_to_json(c));
  EXPECT_EQ(model_config_to_json(back), model_config_to_json(c));
  EXPECT_EQ(back.tmd, c.tmd);
  EXPECT_EQ(back.seed, 99u);

  const auto parsed = model_config_from_json(R"({"model": "SPDNet", "learning_rate": [0.1, 0.01]})");
  EXPECT_DOUBLE_EQ(parsed.lr_start, 0.1);
  EXPECT_DOUBLE_EQ(parsed.lr_end, 0.01);
  EXPECT_THROW(model_config_from_json(R"({"tmd": [60, 20, 3]})"), ConfigError);
  EXPECT_THROW(model_config_from_json(R"({"model": "SPDNet", "depth": 3})"), ConfigError);
  EXPECT_THROW(model_config_from_json(R"({"model": "SPDNet", "epochs": "ten"})"), ConfigError);
  EXPECT_THROW(model_config_from_json("not json"), ConfigError);
}

TEST(ModelConfig, ValidateRejectsInconsistentSettings) {
  auto bad = [](auto mutate) {
    ModelConfig c = ModelConfig::preset(ModelKind::SPDNet);
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](ModelConfig& c) { c.tmd = {60, 3}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ModelConfig& c) { c.tmd = {60, 20, 4}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ModelConfig& c) { c.tmd = {20, 60, 3}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ModelConfig& c) { c.use_rbn = true; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ModelConfig& c) { c.momentum = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ModelConfig& c) { c.batch_size = 0; }).validate(), ConfigError);
  EXPECT_THROW(small(ModelKind::USPDNet6BiRe, {10, 5, 3}).validate(), ConfigError);
}

TEST(Losses, FlattenPreservesNormAndBackwardIsAdjoint) {
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial;
    const SymMatrix s = test::random_sym(n, rng);
    const Vector f = tangent_flatten(s);
    EXPECT_EQ(f.size(), tangent_size(n));
    EXPECT_NEAR(f.norm(), s.frobenius_norm(), 1e-12);
    const Vector g = test::gaussian(static_cast<int>(f.size()), 1, rng);
    const SymMatrix back = tangent_flatten_backward(g, n);
    EXPECT_NEAR(spd::inner(back, s), g.dot(f), 1e-10);
  }
}

TEST(Losses, SoftmaxAndCrossEntropy) {
  const Vector z = (Vector(3) << 1.0, 2.0, 3.0).finished();
  const Vector p = softmax(z);
  const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(p(2), std::exp(3.0) / denom, 1e-15);
  EXPECT_NEAR(cross_entropy(z, 0), std::log(denom) - 1.0, 1e-12);
  const Vector big = (Vector(3) << 1000.0, 0.0, -1000.0).finished();
  EXPECT_TRUE(softmax(big).allFinite());
  EXPECT_NEAR(cross_entropy(big, 0), 0.0, 1e-12);
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix zz = test::gaussian(3, 1, rng);
    const int label = trial % 3;
    const Matrix fd = test::fd_gradient([&](const Matrix& v) { return cross_entropy(v.col(0), label); }, zz);
    EXPECT_LT((cross_entropy_grad(zz.col(0), label) - fd.col(0)).norm(), 1e-8);
  }
  EXPECT_EQ(argmax((Vector(3) << 0.0, 5.0, 5.0).finished()), 1);
}

/// Loss from compute_batch, gradients compared with central differences on
/// every parameter entry.
void check_network_gradients(Network& net, const LabeledSet& data, double tol) {
  BatchOptions opts;
  const BatchResult base = net.compute_batch(data.inputs, data.labels, opts);
  BatchOptions probe;
  probe.compute_grads = false;
  if (!base.rbn_means.empty()) probe.pinned_means = base.rbn_means;
  auto params = net.parameters();
  ASSERT_EQ(params.size(), base.grads.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& value = *params[p].value;
    const Matrix fd = test::fd_gradient(
        [&](const Matrix& v) {
          const Matrix saved = value;
          value = v;
          const double loss = net.compute_batch(data.inputs, data.labels, probe).loss;
          value = saved;
          return loss;
        },
        value, 1e-6);
    EXPECT_LT(test::rel_diff(base.grads[p], fd), tol) << params[p].name;
  }
}

TEST(NetworkGradients, SpdNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(32);
  const auto data = toy_set(2, 6, rng);
  auto net = build_model(small(ModelKind::SPDNet3BiRe, {6, 5, 4, 3, 3}));
  check_network_gradients(*net, data, 1e-6);
}

TEST(NetworkGradients, SpdNetBnMatchesFiniteDifferencesWithPinnedMeans) {
  std::mt19937_64 rng(33);
  const auto data = toy_set(2, 6, rng);
  auto net = build_model(small(ModelKind::SPDNetBN, {6, 4, 3}));
  for (auto& p : net->parameters())
    if (p.kind == ParamKind::Symmetric) *p.value = 0.2 * test::random_sym(4, rng).matrix();
  check_network_gradients(*net, data, 1e-6);
}

TEST(NetworkGradients, USpdNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(34);
  const auto data = toy_set(1, 8, rng);
  auto net = build_model(small(ModelKind::USPDNet6BiRe, {8, 6, 5, 4, 3}));
  check_network_gradients(*net, data, 1e-6);
}

TEST(Networks, LayerListsFollowTheArchitecture) {
  auto spdnet = build_model(ModelConfig::preset(ModelKind::SPDNet));
  EXPECT_EQ(spdnet->describe(), (std::vector<std::string>{"BiMap 60->20", "ReEig", "LogEig", "Linear 210->3"}));
  auto bn = build_model(ModelConfig::preset(ModelKind::SPDNetBN));
  EXPECT_EQ(bn->describe(),
            (std::vector<std::string>{"BiMap 60->20", "RBN 20", "ReEig", "LogEig", "Linear 210->3"}));
  auto deep = build_model(ModelConfig::preset(ModelKind::SPDNet3BiRe));
  EXPECT_EQ(deep->describe().size(), 8u);
  EXPECT_EQ(deep->describe().back(), "Linear 55->3");
}

TEST(Networks, SameSeedSameWeights) {
  auto a = build_model(small(ModelKind::SPDNet, {6, 4, 3}, 5));
  auto b = build_model(small(ModelKind::SPDNet, {6, 4, 3}, 5));
  auto c = build_model(small(ModelKind::SPDNet, {6, 4, 3}, 6));
  const auto pa = a->parameters();
  const auto pb = b->parameters();
  const auto pc = c->parameters();
  EXPECT_EQ(*pa[0].value, *pb[0].value);
  EXPECT_NE(*pa[0].value, *pc[0].value);
  for (const auto& p : pa)
    if (p.kind == ParamKind::Stiefel) {
      EXPECT_LT(layers::orthonormality_error(*p.value), 1e-12);
    }
}

TEST(USpdNet, LatentAndReconstructionShapes) {
  auto cfg = small(ModelKind::USPDNet6BiRe, {10, 8, 6, 4, 3});
  USpdNet net(cfg);
  std::mt19937_64 rng(35);
  const auto out = net.forward(test::random_spd(10, rng));
  EXPECT_EQ(out.latent.dim(), 6);
  EXPECT_EQ(out.reconstruction.dim(), 10);
  EXPECT_EQ(out.logits.size(), 3);
  EXPECT_EQ(net.encoder().size(), 3u);
  EXPECT_EQ(net.decoder().size(), 3u);
}

TEST(USpdNet, SkipBlendEndpointsAndLogLinearity) {
  std::mt19937_64 rng(36);
  const SPDMatrix u = test::random_spd(4, rng);
  const SPDMatrix s = test::random_spd(4, rng);
  EXPECT_LT(test::rel_diff(skip_blend(u, s, 1.0).matrix(), u.matrix()), 1e-12);
  EXPECT_LT(test::rel_diff(skip_blend(u, s, 0.0).matrix(), s.matrix()), 1e-12);
  const Matrix want = 0.3 * spd::spd_log(u).matrix() + 0.7 * spd::spd_log(s).matrix();
  EXPECT_LT(test::rel_diff(spd::spd_log(skip_blend(u, s, 0.3)).matrix(), want), 1e-12);
}

TEST(EpochOrder, OversamplingBalancesClasses) {
  std::vector<int> labels;
  for (int i = 0; i < 17; ++i) labels.push_back(1);
  for (int i = 0; i < 5; ++i) labels.push_back(0);
  for (int i = 0; i < 2; ++i) labels.push_back(2);
  for (int epoch = 1; epoch <= 20; ++epoch) {
    const auto order = epoch_order(labels, true, 3, epoch);
    ASSERT_EQ(order.size(), 51u);
    std::array<int, 3> counts{};
    std::vector<int> seen(labels.size(), 0);
    for (auto i : order) {
      ++counts[labels[i]];
      ++seen[i];
    }
    EXPECT_EQ(counts, (std::array<int, 3>{17, 17, 17}));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      EXPECT_GE(seen[i], 1);
      // Top-ups cycle through full shuffles, so per-sample counts differ by at most one.
      if (labels[i] == 0) {
        EXPECT_LE(seen[i], 4);
      }
    }
    EXPECT_EQ(order, epoch_order(labels, true, 3, epoch));
  }
  auto plain = epoch_order(labels, false, 3, 1);
  EXPECT_NE(plain, epoch_order(labels, false, 3, 2));
  std::sort(plain.begin(), plain.end());
  std::vector<std::size_t> iota(labels.size());
  std::iota(iota.begin(), iota.end(), 0);
  EXPECT_EQ(plain, iota);
}

TEST(Evaluation, ConfusionRecallAndCornerFlag) {
  const std::vector<int> truth{0, 0, 1, 1, 1, 2, 2, 2, 2, 2};
  const std::vector<int> pred{0, 1, 1, 1, 2, 2, 2, 2, 0, 2};
  const auto r = evaluate_predictions(truth, pred);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(r.recall[0], 0.5);
  EXPECT_DOUBLE_EQ(r.recall[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.recall[2], 0.8);
  EXPECT_EQ(r.confusion[2][0], 1);
  EXPECT_FALSE(r.corner_solution);

  // Balanced truth, one class predicted for 19 of 20 samples.
  std::vector<int> t2;
  std::vector<int> p2(20, 1);
  for (int i = 0; i < 20; ++i) t2.push_back(i % 3);
  p2[0] = 0;
  EXPECT_TRUE(evaluate_predictions(t2, p2).corner_solution);
  p2[1] = 0;
  EXPECT_FALSE(evaluate_predictions(t2, p2).corner_solution);  // exactly 0.9 is not above
  // Truth itself dominated by one class: not a corner solution.
  std::vector<int> t3(20, 1);
  t3[0] = 0;
  EXPECT_FALSE(evaluate_predictions(t3, std::vector<int>(20, 1)).corner_solution);
  EXPECT_THROW(evaluate_predictions(std::vector<int>{}, std::vector<int>{}), DataError);
  EXPECT_THROW(evaluate_predictions(truth, std::vector<int>{0}), DataError);
}

TEST(Training, DeterministicAndBestEpochIsFirstMaximum) {
  std::mt19937_64 rng(37);
  const auto train_set = toy_set(8, 6, rng);
  const auto val_set = toy_set(4, 6, rng);
  auto cfg = small(ModelKind::SPDNet, {6, 4, 3}, 11);
  cfg.epochs = 15;
  cfg.batch_size = 6;
  cfg.lr_start = cfg.lr_end = 0.05;
  auto run = [&] {
    auto net = build_model(cfg);
    return train(*net, train_set, val_set);
  };
  const auto a = run();
  const auto b = run();
  std::ostringstream sa;
  std::ostringstream sb;
  write_report_csv(a, sa);
  write_report_csv(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')), "epoch,train_loss,train_acc,val_acc");
  ASSERT_EQ(a.epochs.size(), 15u);
  double best = -1.0;
  int first = 0;
  for (const auto& e : a.epochs)
    if (e.val_acc > best) {
      best = e.val_acc;
      first = e.epoch;
    }
  EXPECT_EQ(a.best_epoch, first);
  EXPECT_DOUBLE_EQ(a.best_val_acc, best);
  EXPECT_DOUBLE_EQ(evaluate(*a.best, val_set).accuracy, best);
  EXPECT_LT(a.epochs.back().train_loss, a.epochs.front().train_loss);
}

TEST(Training, LearnsSeparableToyProblem) {
  std::mt19937_64 rng(38);
  const auto train_set = toy_set(15, 6, rng);
  auto cfg = small(ModelKind::SPDNet, {6, 4, 3}, 2);
  cfg.epochs = 60;
  cfg.batch_size = 9;
  cfg.lr_start = cfg.lr_end = 0.05;
  auto net = build_model(cfg);
  const auto report = train(*net, train_set, LabeledSet{});
  EXPECT_TRUE(std::isnan(report.best_val_acc));
  EXPECT_EQ(report.best_epoch, 60);
  EXPECT_GT(evaluate(*net, train_set).accuracy, 0.8);
}

TEST(Checkpoint, RoundTripPreservesPredictions) {
  std::mt19937_64 rng(39);
  const auto data = toy_set(3, 8, rng);
  test::TempDir dir("ckpt");
  for (auto cfg : {small(ModelKind::SPDNetBN, {8, 5, 3}), small(ModelKind::USPDNet6BiRe, {8, 6, 5, 4, 3}),
                   small(ModelKind::SPDNet3BiRe, {8, 6, 4, 3, 3})}) {
    cfg.epochs = 2;
    cfg.batch_size = 3;
    auto net = build_model(cfg);
    train(*net, data, LabeledSet{});
    const auto path = dir / "model.bin";
    save_checkpoint(path, *net, {7, 6, 5, 4, 3, 2, 1, 0}, 2);
    const auto ck = load_checkpoint(path);
    EXPECT_EQ(ck.input_order, (std::vector<int>{7, 6, 5, 4, 3, 2, 1, 0}));
    EXPECT_EQ(ck.epoch, 2);
    EXPECT_EQ(ck.model->describe(), net->describe());
    EXPECT_EQ(model_config_to_json(ck.model->config()), model_config_to_json(net->config()));
    for (const auto& x : data.inputs) EXPECT_EQ(ck.model->logits(x), net->logits(x));
  }
}

TEST(Checkpoint, CorruptOrMissingFilesFailCleanly) {
  test::TempDir dir("ckpt_bad");
  EXPECT_THROW(load_checkpoint(dir / "missing.bin"), IoError);
  test::write_text(dir / "junk.bin", "definitely not a checkpoint");
  EXPECT_THROW(load_checkpoint(dir / "junk.bin"), DataError);
  auto net = build_model(small(ModelKind::SPDNet, {6, 4, 3}));
  save_checkpoint(dir / "ok.bin", *net);
  std::string bytes = test::read_text(dir / "ok.bin");
  test::write_text(dir / "short.bin", bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_checkpoint(dir / "short.bin"), DataError);
  // Corrupt the first BiMap weight entry so orthonormality fails.
  const double w00 = (*net->parameters().front().value)(0, 0);
  const std::string needle(reinterpret_cast<const char*>(&w00), sizeof w00);
  const auto at = bytes.find(needle);
  ASSERT_NE(at, std::string::npos);
  const double replaced = w00 + 0.5;
  bytes.replace(at, sizeof replaced, reinterpret_cast<const char*>(&replaced), sizeof replaced);
  test::write_text(dir / "flipped.bin", bytes);
  EXPECT_THROW(load_checkpoint(dir / "flipped.bin"), DataError);
}

}  // namespace
}  // namespace spdregime
