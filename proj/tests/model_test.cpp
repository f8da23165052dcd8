#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "gatenet/model.hpp"
#include "gatenet/synth.hpp"
#include "gatenet/trainer.hpp"
#include "naive_oracles.hpp"
#include "testutil.hpp"

using namespace gatenet;
using testutil::random_tensor;

namespace {

BackboneConfig toy_config() { return BackboneConfig{}; }  // 64px, [16,32,64,64,64]

BackboneConfig small_config() {
    BackboneConfig cfg;
    cfg.block_channels = {4, 4, 8, 8, 8};
    cfg.transition_channels = 8;
    cfg.convs_per_block = 1;
    cfg.input_size = 32;
    return cfg;
}

template <typename T>
Tensor4<T> random_images(Rng& rng, int batch, int size) {
    return random_tensor<T>(rng, {batch, 3, size, size}, 0.0, 1.0);
}

template <typename T>
Tensor4<T> random_mask_tensor(Rng& rng, int batch, int size) {
    Tensor4<T> m(batch, 1, size, size);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(0.3) ? T(1) : T(0);
    return m;
}

}  // namespace

TEST(Encoder, ToyShapesFollowStrideArithmetic) {
    GateNet<float> model(toy_config(), ModelVariant::full());
    model.init_params(1);
    Rng rng(2);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 2, 64), true);
    EXPECT_EQ(fwd.inter.at("enc1").value().shape(), (Shape4{2, 16, 64, 64}));
    EXPECT_EQ(fwd.inter.at("enc2").value().shape(), (Shape4{2, 32, 32, 32}));
    EXPECT_EQ(fwd.inter.at("enc3").value().shape(), (Shape4{2, 64, 16, 16}));
    EXPECT_EQ(fwd.inter.at("enc4").value().shape(), (Shape4{2, 64, 8, 8}));
    EXPECT_EQ(fwd.inter.at("enc5").value().shape(), (Shape4{2, 64, 4, 4}));
}

TEST(Encoder, ZeroImageWithZeroBiasesGivesZeroFeatures) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(3);  // training init: biases zero
    Tape<float> tape;
    const auto fwd = model.forward(tape, Tensor4<float>(1, 3, 32, 32), true);
    for (int level = 1; level <= 5; ++level) {
        const Tensor4<float>& e = fwd.inter.at(strcat_all("enc", level)).value();
        for (std::size_t i = 0; i < e.size(); ++i) ASSERT_EQ(e.data()[i], 0.0f);
    }
}

TEST(Encoder, WrongInputSizeRejected) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(1);
    Tape<float> tape;
    EXPECT_THROW(model.forward(tape, Tensor4<float>(1, 3, 16, 16)), std::invalid_argument);
    EXPECT_THROW(model.forward(tape, Tensor4<float>(1, 1, 32, 32)), std::invalid_argument);
}

TEST(Forward, DeterministicRerun) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(5);
    Rng rng(6);
    const Tensor4<float> images = random_images<float>(rng, 2, 32);
    Tape<float> t1, t2;
    EXPECT_EQ(model.forward(t1, images).final_map.value(),
              model.forward(t2, images).final_map.value());
}

TEST(Transitions, ThirtyTwoChannelsSpatialPreserved) {
    GateNet<float> model(toy_config(), ModelVariant::full());
    model.init_params(7);
    Rng rng(8);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 1, 64), true);
    const int sizes[5] = {64, 32, 16, 8, 4};
    for (int level = 1; level <= 5; ++level) {
        const Tensor4<float>& t = fwd.inter.at(strcat_all("trans", level)).value();
        EXPECT_EQ(t.channels(), 32) << "level " << level;
        EXPECT_EQ(t.height(), sizes[level - 1]);
        EXPECT_EQ(t.width(), sizes[level - 1]);
    }
}

TEST(FoldAspp, OutputShapeIsSixteenthResolution) {
    GateNet<float> model(toy_config(), ModelVariant::full());
    model.init_params(9);
    Rng rng(10);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 2, 64), true);
    EXPECT_EQ(fwd.inter.at("trans5").value().shape(), (Shape4{2, 32, 4, 4}));
}

TEST(FoldAspp, ZeroedBranchesReduceToFusedConv1x1Path) {
    BackboneConfig cfg = small_config();
    GateNet<float> model(cfg, ModelVariant::full());
    model.init_params(11);
    // Zero the three folded branches; only the 1x1 branch contributes.
    for (int d : {2, 4, 6}) {
        for (const char* suffix : {".w", ".b"}) {
            const int id = model.params().find(strcat_all("t5.fold", d, suffix));
            ASSERT_GE(id, 0);
            model.params()[static_cast<std::size_t>(id)].value.zero();
        }
    }
    Rng rng(12);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 1, 32), true);
    const Tensor4<float>& e5 = fwd.inter.at("enc5").value();

    auto param = [&](const std::string& name) -> const Tensor4<float>& {
        return model.params()[static_cast<std::size_t>(model.params().find(name))].value;
    };
    const int tc = cfg.transition_channels;
    const Tensor4<float> branch = oracle::naive_conv2d(
        e5, param("t5.conv1x1.w"), param("t5.conv1x1.b"),
        ConvSpec(tc, cfg.block_channels[4], 1, 1, 0));
    Tensor4<float> cat(e5.batch(), 4 * tc, branch.height(), branch.width());
    for (int b = 0; b < cat.batch(); ++b)
        for (int c = 0; c < tc; ++c)
            std::copy(branch.plane(b, c), branch.plane(b, c) + branch.height() * branch.width(),
                      cat.plane(b, c));
    Tensor4<float> fused = oracle::naive_conv2d(cat, param("t5.fuse.w"), param("t5.fuse.b"),
                                                ConvSpec(tc, 4 * tc, 3, 1, 1));
    for (std::size_t i = 0; i < fused.size(); ++i)
        fused.data()[i] = std::max(0.0f, fused.data()[i]);
    EXPECT_LT(oracle::max_abs_diff(fwd.inter.at("trans5").value(), fused), 1e-5);
}

TEST(FoldAspp, EachFoldedBranchMatchesThreeStageOracle) {
    BackboneConfig cfg = small_config();
    GateNet<float> model(cfg, ModelVariant::full());
    model.init_params(13);
    Rng rng(14);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 1, 32), true);
    const Tensor4<float>& e5 = fwd.inter.at("enc5").value();

    for (int d : {2, 4, 6}) {
        const auto& w = model.params()[static_cast<std::size_t>(
                                           model.params().find(strcat_all("t5.fold", d, ".w")))]
                            .value;
        const auto& b = model.params()[static_cast<std::size_t>(
                                           model.params().find(strcat_all("t5.fold", d, ".b")))]
                            .value;
        Tape<float> t2;
        Var<float> branch =
            folded_atrous_conv(constant(t2, e5), constant(t2, w), constant(t2, b), d);
        EXPECT_LT(oracle::max_abs_diff(branch.value(),
                                       oracle::naive_folded_atrous_conv(e5, w, b, d)),
                  1e-5)
            << "dilation " << d;
    }
}

TEST(GateUnit, ZeroInitGivesExactlyHalf) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(15);  // training init zeroes gate convs
    Rng rng(16);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 3, 32));
    for (const auto& [g1, g2] : fwd.gates) {
        for (int b = 0; b < 3; ++b) {
            EXPECT_EQ(g1.value().data()[b], 0.5f);
            EXPECT_EQ(g2.value().data()[b], 0.5f);
        }
    }
}

TEST(GateUnit, ValuesStrictlyInsideUnitInterval) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(17, InitMode::random_nonzero);
    Rng rng(18);
    Tensor4<float> images = random_tensor<float>(rng, {2, 3, 32, 32}, -50.0, 50.0);
    Tape<float> tape;
    const auto fwd = model.forward(tape, images);
    for (const auto& [g1, g2] : fwd.gates)
        for (int b = 0; b < 2; ++b) {
            EXPECT_GT(g1.value().data()[b], 0.0f);
            EXPECT_LT(g1.value().data()[b], 1.0f);
            EXPECT_GT(g2.value().data()[b], 0.0f);
            EXPECT_LT(g2.value().data()[b], 1.0f);
        }
}

TEST(GateUnit, PerSamplePoolingIsIndependentAcrossBatch) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(19, InitMode::random_nonzero);
    Rng rng(20);
    const Tensor4<float> a = random_images<float>(rng, 1, 32);
    const Tensor4<float> b = random_images<float>(rng, 1, 32);
    Tensor4<float> both(2, 3, 32, 32);
    std::copy(a.data(), a.data() + a.size(), both.data());
    std::copy(b.data(), b.data() + b.size(), both.data() + a.size());

    Tape<float> ta, tb, tboth;
    const auto fa = model.forward(ta, a);
    const auto fb = model.forward(tb, b);
    const auto fboth = model.forward(tboth, both);
    for (int level = 0; level < 5; ++level) {
        EXPECT_EQ(fboth.gates[level].first.value().data()[0],
                  fa.gates[level].first.value().data()[0]);
        EXPECT_EQ(fboth.gates[level].first.value().data()[1],
                  fb.gates[level].first.value().data()[0]);
        EXPECT_NE(fboth.gates[level].first.value().data()[0],
                  fboth.gates[level].first.value().data()[1]);
    }
}

TEST(Decoder, ForcedZeroGatesMakePredictionInputIndependent) {
    ModelVariant v;
    v.gate_units = false;
    v.constant_gate = 0.0;
    v.decoder = DecoderShape::progressive;
    v.aspp = AsppMode::conv1x1;
    GateNet<float> model(small_config(), v);
    model.init_params(21, InitMode::random_nonzero);
    Rng rng(22);
    Tape<float> t1, t2;
    const auto f1 = model.forward(t1, random_images<float>(rng, 1, 32));
    const auto f2 = model.forward(t2, random_images<float>(rng, 1, 32));
    EXPECT_EQ(f1.d1_logits.value(), f2.d1_logits.value());
}

TEST(Decoder, ShapesMatchTransitionsAndFullResolutionLogits) {
    GateNet<float> model(toy_config(), ModelVariant::full());
    model.init_params(23);
    Rng rng(24);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 2, 64), true);
    for (int level = 2; level <= 5; ++level) {
        const auto& d = fwd.inter.at(strcat_all("dec", level)).value();
        const auto& t = fwd.inter.at(strcat_all("trans", level)).value();
        EXPECT_EQ(d.height(), t.height());
        EXPECT_EQ(d.width(), t.width());
        EXPECT_EQ(d.channels(), 32);
    }
    EXPECT_EQ(fwd.d1_logits.value().shape(), (Shape4{2, 1, 64, 64}));
    EXPECT_EQ(fwd.final_map.value().shape(), (Shape4{2, 1, 64, 64}));
}

// The gate at level i must consume the decoded level i+1, not the
// transition alone: perturbing the level-5 decoder changes g4 but not g5.
TEST(Decoder, GateInterleavingConsumesHigherDecoding) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(25, InitMode::random_nonzero);
    Rng rng(26);
    const Tensor4<float> images = random_images<float>(rng, 1, 32);

    Tape<float> t1;
    const auto before = model.forward(t1, images);
    const float g4_before = before.gates[3].first.value().data()[0];
    const float g5_before = before.gates[4].first.value().data()[0];

    const int id = model.params().find("dec5.conv1.w");
    ASSERT_GE(id, 0);
    for (std::size_t i = 0; i < model.params()[static_cast<std::size_t>(id)].value.size(); ++i)
        model.params()[static_cast<std::size_t>(id)].value.data()[i] += 0.25f;

    Tape<float> t2;
    const auto after = model.forward(t2, images);
    EXPECT_NE(after.gates[3].first.value().data()[0], g4_before);
    EXPECT_EQ(after.gates[4].first.value().data()[0], g5_before);
}

TEST(ParallelBranch, ConcatChannelCountIs161ForDefaultWidths) {
    GateNet<float> model(toy_config(), ModelVariant::full());
    model.init_params(27);
    Rng rng(28);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 1, 64), true);
    EXPECT_EQ(fwd.inter.at("fcat").value().channels(), 1 + 5 * 32);
}

TEST(ParallelBranch, ZeroGatesLeaveOnlyLogitsChannel) {
    ModelVariant v;  // dual decoder, gates replaced by constant 0
    v.gate_units = false;
    v.constant_gate = 0.0;
    GateNet<float> model(small_config(), v);
    model.init_params(29, InitMode::random_nonzero);
    Rng rng(30);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 1, 32), true);
    const Tensor4<float>& fcat = fwd.inter.at("fcat").value();
    const Tensor4<float>& d1 = fwd.d1_logits.value();
    for (int y = 0; y < fcat.height(); ++y)
        for (int x = 0; x < fcat.width(); ++x) {
            ASSERT_EQ(fcat.at(0, 0, y, x), d1.at(0, 0, y, x));
            for (int c = 1; c < fcat.channels(); ++c) ASSERT_EQ(fcat.at(0, c, y, x), 0.0f);
        }
}

TEST(ParallelBranch, ConcatOrderIsLogitsThenAscendingLevels) {
    ModelVariant v;  // constant gate 1.0 makes slices equal raw upsampled transitions
    v.gate_units = false;
    v.constant_gate = 1.0;
    GateNet<float> model(small_config(), v);
    model.init_params(31, InitMode::random_nonzero);
    Rng rng(32);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 1, 32), true);
    const Tensor4<float>& fcat = fwd.inter.at("fcat").value();
    const int tc = 8, S = 32;
    for (int level = 1; level <= 5; ++level) {
        const Tensor4<float>& t = fwd.inter.at(strcat_all("trans", level)).value();
        const Tensor4<float> up =
            t.height() == S ? t : kernels::bilinear_upsample(t, S, S);
        const int c0 = 1 + (level - 1) * tc;
        for (int c = 0; c < tc; ++c)
            for (int y = 0; y < S; ++y)
                for (int x = 0; x < S; ++x)
                    ASSERT_EQ(fcat.at(0, c0 + c, y, x), up.at(0, c, y, x))
                        << "level " << level;
    }
}

TEST(Fusion, ZeroFusionConvMakesFinalMapSigmoidOfLogits) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(33, InitMode::random_nonzero);
    for (const char* name : {"fuse.w", "fuse.b"}) {
        const int id = model.params().find(name);
        ASSERT_GE(id, 0);
        model.params()[static_cast<std::size_t>(id)].value.zero();
    }
    Rng rng(34);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 2, 32));
    Tape<float> t2;
    Var<float> expected = sigmoid(constant(t2, fwd.d1_logits.value()));
    EXPECT_EQ(fwd.final_map.value(), expected.value());
}

TEST(Fusion, ResidualAddIsNotDegenerate) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(35, InitMode::random_nonzero);
    Rng rng(36);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 1, 32), true);
    // Recompute the parallel prediction without the residual logits.
    const Tensor4<float>& fcat = fwd.inter.at("fcat").value();
    auto param = [&](const std::string& n) -> const Tensor4<float>& {
        return model.params()[static_cast<std::size_t>(model.params().find(n))].value;
    };
    Tensor4<float> conv = oracle::naive_conv2d(fcat, param("fuse.w"), param("fuse.b"),
                                               ConvSpec(1, fcat.channels(), 3, 1, 1));
    Tape<float> t2;
    Var<float> without_residual = sigmoid(constant(t2, conv));
    EXPECT_GT(oracle::max_abs_diff(fwd.final_map.value(), without_residual.value()), 1e-4);
}

TEST(Fusion, OutputsInsideUnitInterval) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(37, InitMode::random_nonzero);
    Rng rng(38);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 2, 32));
    const Tensor4<float>& fm = fwd.final_map.value();
    for (std::size_t i = 0; i < fm.size(); ++i) {
        ASSERT_GT(fm.data()[i], 0.0f);
        ASSERT_LT(fm.data()[i], 1.0f);
    }
}

TEST(ZeroInitGates, EqualConstantHalfGatesExactly) {
    const BackboneConfig cfg = small_config();
    GateNet<float> learned(cfg, ModelVariant::full());
    learned.init_params(39);  // gate convs zero -> every gate exactly 0.5

    ModelVariant const_half;
    const_half.gate_units = false;
    const_half.constant_gate = 0.5;
    GateNet<float> fixed(cfg, const_half);
    fixed.init_params(39);
    // Same seed draws the same values for the shared (non-gate) parameters in
    // registration order only if the tables align; copy instead of relying on it.
    for (std::size_t i = 0; i < fixed.params().size(); ++i) {
        const int src = learned.params().find(fixed.params()[i].name);
        ASSERT_GE(src, 0) << fixed.params()[i].name;
        fixed.params()[i].value = learned.params()[static_cast<std::size_t>(src)].value;
    }

    Rng rng(40);
    const Tensor4<float> images = random_images<float>(rng, 2, 32);
    Tape<float> t1, t2;
    EXPECT_EQ(learned.forward(t1, images).final_map.value(),
              fixed.forward(t2, images).final_map.value());
}

TEST(Loss, TotalIsSumOfBothSupervisionTerms) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(41, InitMode::random_nonzero);
    Rng rng(42);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 2, 32));
    const Tensor4<float> target = random_mask_tensor<float>(rng, 2, 32);
    const auto parts = model.loss(tape, fwd, target);
    EXPECT_EQ(parts.total.value().data()[0],
              parts.fpn.value().data()[0] + parts.fused.value().data()[0]);
}

TEST(Loss, NonBinaryTargetRejected) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(43);
    Rng rng(44);
    Tape<float> tape;
    const auto fwd = model.forward(tape, random_images<float>(rng, 1, 32));
    Tensor4<float> bad = Tensor4<float>::full({1, 1, 32, 32}, 0.5f);
    EXPECT_THROW(model.loss(tape, fwd, bad), std::invalid_argument);
}

TEST(Gradients, EveryParameterReceivesNonzeroGradient) {
    for (const auto& [name, variant] : ablation_ladder()) {
        GateNet<float> model(small_config(), variant);
        model.init_params(45, InitMode::random_nonzero);
        Rng rng(46);
        Tape<float> tape;
        const auto fwd = model.forward(tape, random_images<float>(rng, 2, 32));
        const auto parts = model.loss(tape, fwd, random_mask_tensor<float>(rng, 2, 32));
        tape.backward(parts.total);
        model.collect_grads(tape, fwd);
        for (std::size_t i = 0; i < model.params().size(); ++i) {
            const auto& e = model.params()[i];
            bool any = false;
            for (std::size_t k = 0; k < e.grad.size() && !any; ++k)
                any = e.grad.data()[k] != 0.0f;
            EXPECT_TRUE(any) << name << ": dead parameter " << e.name;
        }
    }
}

TEST(Ablation, GatesOffModelHasNoGateParameters) {
    GateNet<float> model(small_config(), ModelVariant::baseline_fpn());
    for (const std::string& n : model.params().names())
        EXPECT_EQ(n.rfind("gate", 0), std::string::npos) << n;
}

TEST(Ablation, FoldVsPlainAsppDifferOnlyInTopHead) {
    ModelVariant fold = ModelVariant::full();
    ModelVariant plain = ModelVariant::full();
    plain.aspp = AsppMode::aspp;
    GateNet<float> mf(small_config(), fold);
    GateNet<float> mp(small_config(), plain);
    const auto fold_names = mf.params().names();
    const auto plain_names = mp.params().names();
    std::set<std::string> nf(fold_names.begin(), fold_names.end());
    std::set<std::string> np(plain_names.begin(), plain_names.end());
    std::vector<std::string> diff;
    std::set_symmetric_difference(nf.begin(), nf.end(), np.begin(), np.end(),
                                  std::back_inserter(diff));
    EXPECT_FALSE(diff.empty());
    for (const std::string& n : diff) EXPECT_EQ(n.rfind("t5.", 0), 0u) << n;
}

TEST(Ablation, BaselineEqualsGatesOffConv1x1ParallelOff) {
    ModelVariant manual;
    manual.gate_units = false;
    manual.aspp = AsppMode::conv1x1;
    manual.decoder = DecoderShape::progressive;
    EXPECT_EQ(manual, ModelVariant::baseline_fpn());
    GateNet<float> a(small_config(), manual);
    GateNet<float> b(small_config(), ModelVariant::baseline_fpn());
    EXPECT_EQ(a.params().names(), b.params().names());
}

TEST(Ablation, LadderParameterTablesStrictlyNest) {
    const auto ladder = ablation_ladder();
    std::vector<std::set<std::string>> tables;
    for (const auto& [name, variant] : ladder) {
        GateNet<float> m(small_config(), variant);
        const auto names = m.params().names();
        tables.emplace_back(names.begin(), names.end());
    }
    for (std::size_t i = 1; i < tables.size(); ++i) {
        EXPECT_TRUE(std::includes(tables[i].begin(), tables[i].end(), tables[i - 1].begin(),
                                  tables[i - 1].end()))
            << ladder[i].first << " does not contain " << ladder[i - 1].first;
        EXPECT_GT(tables[i].size(), tables[i - 1].size());
    }
}

TEST(Ablation, FoldAsppRejectedWhenFoldedLevelWouldBeOdd) {
    BackboneConfig cfg = small_config();
    cfg.input_size = 16;  // 1/16 level is 1x1: folding impossible
    EXPECT_THROW(GateNet<float>(cfg, ModelVariant::full()), std::invalid_argument);
    ModelVariant plain = ModelVariant::full();
    plain.aspp = AsppMode::aspp;
    EXPECT_NO_THROW(GateNet<float>(cfg, plain));
}

TEST(Ablation, SingleLayerVariantsForward) {
    for (AsppMode mode : {AsppMode::single_atrous, AsppMode::single_fold}) {
        ModelVariant v = ModelVariant::full();
        v.aspp = mode;
        v.single_rate = 4;
        GateNet<float> m(small_config(), v);
        m.init_params(47);
        Rng rng(48);
        Tape<float> tape;
        const auto fwd = m.forward(tape, random_images<float>(rng, 1, 32));
        EXPECT_EQ(fwd.final_map.value().shape(), (Shape4{1, 1, 32, 32}));
    }
}

TEST(Ablation, ParallelOnlyDecoderForwardAndLoss) {
    ModelVariant v = ModelVariant::full();
    v.decoder = DecoderShape::parallel_only;
    GateNet<float> m(small_config(), v);
    m.init_params(49);
    Rng rng(50);
    Tape<float> tape;
    const auto fwd = m.forward(tape, random_images<float>(rng, 1, 32));
    EXPECT_FALSE(fwd.d1_logits.valid());
    EXPECT_EQ(fwd.final_map.value().shape(), (Shape4{1, 1, 32, 32}));
    const auto parts = m.loss(tape, fwd, random_mask_tensor<float>(rng, 1, 32));
    EXPECT_TRUE(parts.fused.valid());
    EXPECT_FALSE(parts.fpn.valid());
}

TEST(GateStatistics, ZeroInitMeansAreExactlyHalf) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(51);
    SynthSpec spec;
    spec.seed = 77;
    spec.count = 6;
    spec.size = 32;
    const auto dataset = generate_dataset(spec);
    const GateStats stats = gate_statistics(model, dataset, 4);
    for (int level = 0; level < 5; ++level) {
        EXPECT_EQ(stats.mean_g1[level], 0.5);
        EXPECT_EQ(stats.mean_g2[level], 0.5);
    }
}

TEST(GateStatistics, SingleImageEqualsItsGates) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(53, InitMode::random_nonzero);
    SynthSpec spec;
    spec.seed = 78;
    spec.count = 1;
    spec.size = 32;
    const auto dataset = generate_dataset(spec);
    const GateStats stats = gate_statistics(model, dataset, 4);

    auto [images, masks] = to_batch<float>(dataset, {0});
    Tape<float> tape;
    const auto fwd = model.forward(tape, images);
    for (int level = 0; level < 5; ++level) {
        EXPECT_EQ(stats.mean_g1[level],
                  static_cast<double>(fwd.gates[level].first.value().data()[0]));
        EXPECT_EQ(stats.mean_g2[level],
                  static_cast<double>(fwd.gates[level].second.value().data()[0]));
    }
}

TEST(GateStatistics, EmptyDatasetRejected) {
    GateNet<float> model(small_config(), ModelVariant::full());
    model.init_params(55);
    EXPECT_THROW(gate_statistics(model, {}, 4), std::invalid_argument);
}
