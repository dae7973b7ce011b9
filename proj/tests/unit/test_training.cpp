#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "ilr/backbone.hpp"
#include "ilr/checkpoint.hpp"
#include "ilr/error.hpp"
#include "ilr/optimizer.hpp"
#include "ilr/reri.hpp"
#include "ilr/risa.hpp"
#include "ilr/training.hpp"
#include "test_util.hpp"

namespace ilr {
namespace {

TrainConfig quick_config() {
  TrainConfig c;
  c.lr = 0.005;
  c.batch_size = 8;
  c.epochs = 1;
  c.types = {FeatureType::Img, FeatureType::CF};
  c.n_negatives = 10;
  return c;
}

TEST(Training, ZeroEpochsReturnsInitialisation) {
  const auto w = test::small_world();
  const auto model = test::tiny_model(w, {FeatureType::Img});
  auto c = quick_config();
  c.types = {FeatureType::Img};
  c.epochs = 0;
  const auto r = train(w.context(), w.split, model, c);
  const auto init = init_params<float>(std::make_shared<ParamLayout>(model), c.seed);
  EXPECT_TRUE(bit_identical(r.best, init));
  EXPECT_EQ(r.epochs_run, 0u);
  EXPECT_EQ(r.best_epoch, 0u);
  EXPECT_TRUE(r.log.empty());
}

TEST(Training, OverfitsOneExample) {
  const auto w = test::small_world();
  const auto layout = std::make_shared<ParamLayout>(test::tiny_model(w, {FeatureType::Img}, 16));
  auto p = init_params<float>(layout, 1);
  const auto ctx = w.context();
  const auto& u = w.split.users[0];
  Rng rng(2);
  const auto ex = make_risa_example(ctx, u, rng);
  const std::vector<std::string> prefix(u.train.begin(), u.train.end() - 1);
  auto loss = [&](const ParamSet<float>& q, ParamSet<float>* g) {
    return risa_example_loss(q, ctx, ex, g) +
           reri_loss(q, ctx, prefix, u.train.back(), u.test, {FeatureType::Img}, Mode::Image,
                     kUnlimitedBudget, g)
               .total();
  };
  AdamState st = AdamState::zeros(layout);
  AdamOptions o;
  o.lr = 0.01;
  float first = 0;
  float last = 0;
  for (int s = 0; s < 200; ++s) {
    const auto g = gradients<float>(p, loss, &last);
    if (s == 0) first = last;
    adam_update(p, g, st, o);
  }
  last = loss(p, nullptr);
  EXPECT_LT(last, 0.1f * first) << "first " << first << " last " << last;
}

TEST(Training, SameSeedSameRun) {
  const auto w = test::small_world();
  const auto model = test::tiny_model(w, {FeatureType::Img, FeatureType::CF});
  const auto c = quick_config();
  const auto a = train(w.context(), w.split, model, c);
  const auto b = train(w.context(), w.split, model, c);
  EXPECT_TRUE(bit_identical(a.final_state.params, b.final_state.params));
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].loss.total(), b.log[i].loss.total());
  }
  EXPECT_EQ(a.val_hit5, b.val_hit5);
  auto c2 = c;
  c2.seed = 2;
  const auto d = train(w.context(), w.split, model, c2);
  EXPECT_FALSE(bit_identical(a.final_state.params, d.final_state.params));
}

TEST(Training, SavedStateResumesExactly) {
  const auto w = test::small_world();
  const auto model = test::tiny_model(w, {FeatureType::Img});
  auto c = quick_config();
  c.types = {FeatureType::Img};
  const auto layout = std::make_shared<const ParamLayout>(model);
  Trainer straight(w.context(), w.split, c, initial_state(layout, c.seed));
  for (int s = 0; s < 4; ++s) straight.step();

  Trainer first(w.context(), w.split, c, initial_state(layout, c.seed));
  first.step();
  first.step();
  const auto path = test::temp_dir("resume") / "state.bin";
  save_train_state(first.state(), path);
  Trainer second(w.context(), w.split, c, load_train_state(path));
  EXPECT_EQ(second.state().step, 2u);
  second.step();
  second.step();
  EXPECT_TRUE(bit_identical(straight.state().params, second.state().params));
  EXPECT_TRUE(bit_identical(straight.state().adam.m, second.state().adam.m));
}

TEST(Training, FrozenBackboneStaysFixed) {
  const auto w = test::small_world();
  auto model = test::tiny_model(w, {FeatureType::Img});
  model.backbone.trainable = false;
  auto c = quick_config();
  c.types = {FeatureType::Img};
  const auto layout = std::make_shared<const ParamLayout>(model);
  Trainer t(w.context(), w.split, c, initial_state(layout, c.seed));
  const auto start = t.state().params;
  for (int s = 0; s < 3; ++s) t.step();
  EXPECT_TRUE(group_bit_identical(start, t.state().params, ParamGroup::Backbone));
  EXPECT_FALSE(group_bit_identical(start, t.state().params, ParamGroup::Adaptor));
  EXPECT_FALSE(group_bit_identical(start, t.state().params, ParamGroup::RecToken));
  EXPECT_FALSE(group_bit_identical(start, t.state().params, ParamGroup::Projector));
}

TEST(Training, StepLossHasEveryActiveTerm) {
  const auto w = test::small_world();
  const auto model = test::tiny_model(w, {FeatureType::Img, FeatureType::CF, FeatureType::Text});
  auto c = quick_config();
  c.types = {FeatureType::Img, FeatureType::Text};
  const auto layout = std::make_shared<const ParamLayout>(model);
  Trainer t(w.context(), w.split, c, initial_state(layout, c.seed));
  const auto loss = t.step();
  EXPECT_GT(loss.risa, 0);
  EXPECT_GT(loss.reri[0], 0);
  EXPECT_EQ(loss.reri[1], 0);
  EXPECT_GT(loss.reri[2], 0);
  EXPECT_DOUBLE_EQ(loss.total(), loss.risa + loss.reri[0] + loss.reri[2]);
  const auto risa_only = t.step(Phase::RisaOnly);
  EXPECT_EQ(risa_only.reri[0], 0);
  EXPECT_GT(risa_only.risa, 0);
}

TEST(Training, NonFiniteLossIsNumericError) {
  const auto w = test::small_world();
  const auto model = test::tiny_model(w, {FeatureType::Img});
  auto c = quick_config();
  c.types = {FeatureType::Img};
  const auto layout = std::make_shared<const ParamLayout>(model);
  auto state = initial_state(layout, 1);
  state.params[layout->rec](0, 0) = std::numeric_limits<float>::infinity();
  Trainer t(w.context(), w.split, c, std::move(state));
  try {
    t.step();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
  }
}

TEST(Training, InactiveProjectorIsConfigError) {
  const auto w = test::small_world();
  const auto model = test::tiny_model(w, {FeatureType::Img});
  auto c = quick_config();
  c.types = {FeatureType::Img, FeatureType::CF};
  try {
    train(w.context(), w.split, model, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
  c.lr = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Training, LogHasHeaderMetadataAndOneRowPerStep) {
  const auto w = test::small_world();
  const auto model = test::tiny_model(w, {FeatureType::Img});
  auto c = quick_config();
  c.types = {FeatureType::Img};
  const auto r = train(w.context(), w.split, model, c);
  const auto path = test::temp_dir("log") / "train_log.csv";
  write_training_log(path, r.log, {{"seed", "1"}, {"mode", "image"}});
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3 + r.log.size());
  EXPECT_EQ(lines[0], "# mode=image");
  EXPECT_EQ(lines[1], "# seed=1");
  EXPECT_EQ(lines[2], "step,L_final,L_RISA,L_RERI_Img,L_RERI_CF,L_RERI_Text,wall_ms");
  EXPECT_EQ(lines[3].substr(0, 2), "0,");
  Trainer probe(w.context(), w.split, c,
                initial_state(std::make_shared<const ParamLayout>(model), c.seed));
  EXPECT_EQ(r.log.size(), probe.steps_per_epoch());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto w = test::small_world();
  Checkpoint ck;
  ck.model = test::tiny_model(w, {FeatureType::Img, FeatureType::Text});
  ck.model.backbone.trainable = false;
  ck.vocab = w.vocab;
  ck.meta = {{"mode", "image"}, {"types", "img,text"}};
  ck.params = init_params<float>(std::make_shared<ParamLayout>(ck.model), 4);
  const auto path = test::temp_dir("ckpt") / "model.ilrc";
  save_checkpoint(ck, path);
  const auto back = load_checkpoint(path);
  EXPECT_TRUE(bit_identical(ck.params, back.params));
  EXPECT_EQ(back.vocab.tokens(), ck.vocab.tokens());
  EXPECT_EQ(back.meta, ck.meta);
  EXPECT_EQ(back.model.item_dims, ck.model.item_dims);
  EXPECT_FALSE(back.model.backbone.trainable);
  EXPECT_EQ(back.model.backbone.d_model, ck.model.backbone.d_model);
}

TEST(Checkpoint, CorruptBytesAreFormatErrors) {
  const auto w = test::small_world();
  Checkpoint ck;
  ck.model = test::tiny_model(w, {FeatureType::Img});
  ck.vocab = w.vocab;
  ck.params = init_params<float>(std::make_shared<ParamLayout>(ck.model), 4);
  auto bytes = encode_container(to_container(ck));
  auto expect_format = [](const std::vector<std::uint8_t>& b) {
    try {
      from_container(decode_container(b));
      ADD_FAILURE() << "accepted corrupt checkpoint";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Format) << e.what();
    }
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_format(bad_magic);
  auto cut = bytes;
  cut.resize(bytes.size() / 2);
  expect_format(cut);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ilrc"), Error);
}

}  // namespace
}  // namespace ilr
