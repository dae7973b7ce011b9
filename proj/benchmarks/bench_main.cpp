#include <benchmark/benchmark.h>

#include "ilr/backbone.hpp"
#include "ilr/bench.hpp"
#include "ilr/evaluation.hpp"
#include "ilr/reri.hpp"
#include "ilr/synth.hpp"
#include "ilr/training.hpp"

namespace {

struct Fixture {
  ilr::SyntheticData data;
  ilr::DatasetSplit split;
  ilr::Vocabulary vocab;
  ilr::ModelConfig model;
  ilr::ParamSet<float> params;

  Fixture() {
    data = ilr::synth_generate(ilr::SyntheticSpec{});
    split = ilr::leave_one_out(ilr::build_sequences(data.records));
    vocab = ilr::build_model_vocab(data.catalog);
    ilr::ModelConfig base;
    base.adaptor_hidden = 64;
    model = ilr::make_model_config(base, vocab, data.features,
                                   {ilr::FeatureType::Img, ilr::FeatureType::CF,
                                    ilr::FeatureType::Text},
                                   ilr::Mode::Image, false);
    params = ilr::init_params<float>(std::make_shared<ilr::ParamLayout>(model), 1);
  }

  ilr::ModelContext context() const { return {&vocab, &data.catalog, &data.features, false}; }

  std::vector<std::string> prefix() const {
    auto p = split.users.front().train;
    p.push_back(split.users.front().validation);
    return p;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Tokenize(benchmark::State& state) {
  const auto& f = fixture();
  const auto& text = f.data.catalog.items().front().description;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ilr::tokenize(f.vocab, text));
  }
}
BENCHMARK(BM_Tokenize);

void BM_RecPlan(benchmark::State& state) {
  const auto& f = fixture();
  const auto mode = static_cast<ilr::Mode>(state.range(0));
  const auto prefix = f.prefix();
  for (auto _ : state) {
    const auto plan = ilr::build_rec_plan(f.vocab, f.data.catalog, prefix, mode,
                                          ilr::kUnlimitedBudget);
    state.counters["tokens"] = static_cast<double>(plan.size());
    benchmark::DoNotOptimize(plan.tokens.data());
  }
}
BENCHMARK(BM_RecPlan)
    ->Arg(static_cast<int>(ilr::Mode::Image))
    ->Arg(static_cast<int>(ilr::Mode::Attribute))
    ->Arg(static_cast<int>(ilr::Mode::Description));

void BM_Forward(benchmark::State& state) {
  const auto& f = fixture();
  const auto n = static_cast<Eigen::Index>(state.range(0));
  ilr::Mat<float> x = ilr::Mat<float>::Random(n, static_cast<Eigen::Index>(f.model.backbone.d_model));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ilr::forward_rows<float>(f.params, x, {}, nullptr).hidden.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Forward)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void BM_UserRepr(benchmark::State& state) {
  const auto& f = fixture();
  const auto mode = static_cast<ilr::Mode>(state.range(0));
  const auto prefix = f.prefix();
  const auto ctx = f.context();
  for (auto _ : state) {
    benchmark::DoNotOptimize(ilr::user_repr(f.params, ctx, prefix, mode).data());
  }
}
BENCHMARK(BM_UserRepr)
    ->Arg(static_cast<int>(ilr::Mode::Image))
    ->Arg(static_cast<int>(ilr::Mode::Description))
    ->Unit(benchmark::kMillisecond);

void BM_ScoreCandidates(benchmark::State& state) {
  const auto& f = fixture();
  const auto ctx = f.context();
  const auto h = ilr::user_repr(f.params, ctx, f.prefix(), ilr::Mode::Image);
  const auto cands = ilr::sample_candidates(f.split.users.front(), f.data.catalog, 100, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ilr::score_candidates(
        f.params, ctx, h, cands,
        {ilr::FeatureType::Img, ilr::FeatureType::CF, ilr::FeatureType::Text}));
  }
}
BENCHMARK(BM_ScoreCandidates);

void BM_TrainStep(benchmark::State& state) {
  const auto& f = fixture();
  ilr::TrainConfig tc;
  tc.batch_size = 8;
  tc.types = {ilr::FeatureType::Img};
  ilr::Trainer trainer(f.context(), f.split, tc,
                       ilr::initial_state(f.params.layout, tc.seed));
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer.step().total());
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
