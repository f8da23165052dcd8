#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gatenet/checkpoint.hpp"
#include "gatenet/config.hpp"
#include "gatenet/optim.hpp"
#include "gatenet/synth.hpp"
#include "gatenet/trainer.hpp"
#include "testutil.hpp"

using namespace gatenet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gatenet_trainer_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

TrainConfig tiny_cfg() {
    TrainConfig cfg = preset_config("tiny");
    cfg.epochs = 2;
    cfg.batch = 2;
    cfg.seed = 11;
    return cfg;
}

std::vector<Sample> tiny_dataset(int count, uint64_t seed = 100) {
    SynthSpec spec;
    spec.seed = seed;
    spec.count = count;
    spec.size = 32;
    return generate_dataset(spec);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST(PolyLr, KnownValues) {
    EXPECT_DOUBLE_EQ(poly_lr(0, 100, 0.001), 0.001);
    EXPECT_DOUBLE_EQ(poly_lr(100, 100, 0.001), 0.0);
    EXPECT_NEAR(poly_lr(50, 100, 0.001), 5.3589e-4, 1e-8);
    EXPECT_NEAR(poly_lr(50, 100, 0.001), 0.001 * std::pow(0.5, 0.9), 1e-18);
}

TEST(PolyLr, RejectsIterBeyondMax) {
    EXPECT_THROW(poly_lr(101, 100, 0.001), std::invalid_argument);
    EXPECT_THROW(poly_lr(-1, 100, 0.001), std::invalid_argument);
}

TEST(PolyLr, MonotoneNonIncreasing) {
    double prev = poly_lr(0, 500, 0.01);
    for (int it = 1; it <= 500; ++it) {
        const double lr = poly_lr(it, 500, 0.01);
        ASSERT_LE(lr, prev);
        prev = lr;
    }
}

TEST(Sgd, PlainStepWithoutMomentumOrDecay) {
    ParamTable<double> table;
    table.add("p.w", Shape4{1, 1, 1, 1}, false);
    table[0].value.data()[0] = 1.0;
    table[0].grad.data()[0] = 0.5;
    sgd_step(table, 0.1, 0.0, 0.0);
    EXPECT_DOUBLE_EQ(table[0].value.data()[0], 0.95);
}

TEST(Sgd, ZeroGradZeroVelocityLeavesParamsUnchanged) {
    ParamTable<double> table;
    table.add("p.w", Shape4{1, 2, 1, 1}, false);
    table[0].value.data()[0] = 3.0;
    table[0].value.data()[1] = -2.0;
    sgd_step(table, 0.1, 0.9, 0.0);
    EXPECT_DOUBLE_EQ(table[0].value.data()[0], 3.0);
    EXPECT_DOUBLE_EQ(table[0].value.data()[1], -2.0);
}

TEST(Sgd, TwoHandTrackedMomentumSteps) {
    // p0=1, g=0.5 each step, lr=0.1, momentum=0.9, wd=0:
    //   v1=0.5   -> p1 = 1 - 0.05  = 0.95
    //   v2=0.95  -> p2 = 0.95 - 0.095 = 0.855
    ParamTable<double> table;
    table.add("p.w", Shape4{1, 1, 1, 1}, false);
    table[0].value.data()[0] = 1.0;
    table[0].grad.data()[0] = 0.5;
    sgd_step(table, 0.1, 0.9, 0.0);
    EXPECT_DOUBLE_EQ(table[0].value.data()[0], 0.95);
    table[0].grad.data()[0] = 0.5;
    sgd_step(table, 0.1, 0.9, 0.0);
    EXPECT_DOUBLE_EQ(table[0].value.data()[0], 0.855);
}

TEST(Sgd, WeightDecaySkipsBiases) {
    ParamTable<double> table;
    table.add("p.w", Shape4{1, 1, 1, 1}, false);
    table.add("p.b", Shape4{1, 1, 1, 1}, true);
    table[0].value.data()[0] = 2.0;
    table[1].value.data()[0] = 2.0;
    sgd_step(table, 0.1, 0.0, 0.5);
    EXPECT_DOUBLE_EQ(table[0].value.data()[0], 2.0 - 0.1 * (0.5 * 2.0));
    EXPECT_DOUBLE_EQ(table[1].value.data()[0], 2.0);
}

TEST(Sgd, NanGradientAbortsNamingParameter) {
    ParamTable<double> table;
    table.add("enc1.conv1.w", Shape4{1, 1, 1, 1}, false);
    table[0].grad.data()[0] = std::nan("");
    try {
        sgd_step(table, 0.1, 0.9, 0.0);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("enc1.conv1.w"), std::string::npos);
    }
}

TEST(Checkpoint, RoundTripPreservesForwardBitwise) {
    const fs::path dir = temp_dir("roundtrip");
    TrainConfig cfg = tiny_cfg();
    GateNet<float> model(cfg.model, cfg.variant);
    model.init_params(cfg.seed, InitMode::random_nonzero);
    for (std::size_t i = 0; i < model.params().size(); ++i)
        for (std::size_t k = 0; k < model.params()[i].velocity.size(); ++k)
            model.params()[i].velocity.data()[k] = 0.125f * static_cast<float>(k % 7);

    const std::string path = (dir / "c.gnet").string();
    save_checkpoint(path, model, 42, config_to_text(cfg));

    GateNet<float> loaded(cfg.model, cfg.variant);
    const RawCheckpoint raw = load_checkpoint_raw(path);
    EXPECT_EQ(raw.config_text, config_to_text(cfg));
    EXPECT_EQ(apply_checkpoint(raw, loaded), 42u);
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        EXPECT_EQ(loaded.params()[i].value, model.params()[i].value);
        EXPECT_EQ(loaded.params()[i].velocity, model.params()[i].velocity);
    }

    Rng rng(1);
    const Tensor4<float> images =
        testutil::random_tensor<float>(rng, {1, 3, cfg.model.input_size, cfg.model.input_size},
                                       0.0, 1.0);
    Tape<float> t1, t2;
    EXPECT_EQ(model.forward(t1, images).final_map.value(),
              loaded.forward(t2, images).final_map.value());
    fs::remove_all(dir);
}

TEST(Checkpoint, CorruptedPayloadByteRejectedByChecksum) {
    const fs::path dir = temp_dir("corrupt");
    TrainConfig cfg = tiny_cfg();
    GateNet<float> model(cfg.model, cfg.variant);
    model.init_params(1);
    const std::string path = (dir / "c.gnet").string();
    save_checkpoint(path, model, 1, config_to_text(cfg));

    std::string bytes = slurp(path);
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    try {
        load_checkpoint_raw(path);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(Checkpoint, BadMagicVersionAndTruncationRejected) {
    const fs::path dir = temp_dir("badfile");
    const std::string path = (dir / "c.gnet").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE";
    }
    EXPECT_THROW(load_checkpoint_raw(path), DataError);
    {
        // Valid CRC over a bogus body still fails on magic.
        std::vector<std::uint8_t> body = {'X', 'X', 'X', 'X', 1, 0, 0, 0, 4,
                                          0,   0,   0,   0,   0, 0, 0, 0};
        const std::uint32_t crc = crc32(body.data(), body.size());
        for (int i = 0; i < 4; ++i) body.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(body.data()),
                  static_cast<std::streamsize>(body.size()));
    }
    EXPECT_THROW(load_checkpoint_raw(path), DataError);
    fs::remove_all(dir);
}

TEST(Checkpoint, MismatchedModelRejected) {
    const fs::path dir = temp_dir("mismatch");
    TrainConfig cfg = tiny_cfg();
    GateNet<float> model(cfg.model, cfg.variant);
    model.init_params(1);
    const std::string path = (dir / "c.gnet").string();
    save_checkpoint(path, model, 7, config_to_text(cfg));

    TrainConfig other = cfg;
    other.model.transition_channels = 4;
    GateNet<float> wrong(other.model, other.variant);
    const RawCheckpoint raw = load_checkpoint_raw(path);
    EXPECT_NE(raw.config_text, config_to_text(other));  // CLI-level incompatibility check
    EXPECT_THROW(apply_checkpoint(raw, wrong), std::invalid_argument);
    fs::remove_all(dir);
}

TEST(Checkpoint, DtypeMismatchRejected) {
    const fs::path dir = temp_dir("dtype");
    TrainConfig cfg = tiny_cfg();
    GateNet<float> model(cfg.model, cfg.variant);
    model.init_params(1);
    const std::string path = (dir / "c.gnet").string();
    save_checkpoint(path, model, 7, config_to_text(cfg));
    GateNet<double> wrong(cfg.model, cfg.variant);
    const RawCheckpoint raw = load_checkpoint_raw(path);
    EXPECT_THROW(apply_checkpoint(raw, wrong), std::invalid_argument);
    fs::remove_all(dir);
}

TEST(Train, SingleIterationWithZeroLrLeavesParamsUnchanged) {
    TrainConfig cfg = tiny_cfg();
    cfg.base_lr = 0.0;
    cfg.epochs = 1;
    const auto dataset = tiny_dataset(2);
    GateNet<float> model(cfg.model, cfg.variant);
    model.init_params(cfg.seed);
    std::vector<Tensor4<float>> before;
    for (std::size_t i = 0; i < model.params().size(); ++i)
        before.push_back(model.params()[i].value);
    train_model(model, cfg, dataset, {}, "");
    for (std::size_t i = 0; i < model.params().size(); ++i)
        EXPECT_EQ(model.params()[i].value, before[i]) << model.params()[i].name;
}

TEST(Train, SeededRunsProduceIdenticalLogs) {
    const fs::path d1 = temp_dir("det1");
    const fs::path d2 = temp_dir("det2");
    TrainConfig cfg = tiny_cfg();
    const auto train_set = tiny_dataset(6);
    const auto val_set = tiny_dataset(2, 555);

    GateNet<float> m1(cfg.model, cfg.variant);
    m1.init_params(cfg.seed);
    const TrainResult r1 = train_model(m1, cfg, train_set, val_set, d1.string());

    GateNet<float> m2(cfg.model, cfg.variant);
    m2.init_params(cfg.seed);
    const TrainResult r2 = train_model(m2, cfg, train_set, val_set, d2.string());

    ASSERT_EQ(r1.log.size(), r2.log.size());
    for (std::size_t i = 0; i < r1.log.size(); ++i) {
        EXPECT_EQ(r1.log[i].loss, r2.log[i].loss);
        EXPECT_EQ(r1.log[i].lr, r2.log[i].lr);
    }
    EXPECT_EQ(slurp(d1 / "train_log.csv"), slurp(d2 / "train_log.csv"));
    EXPECT_EQ(slurp(d1 / "eval_log.csv"), slurp(d2 / "eval_log.csv"));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(Train, ResumeContinuesTrajectoryExactly) {
    const fs::path full_dir = temp_dir("resume_full");
    const fs::path part_dir = temp_dir("resume_part");
    TrainConfig cfg = tiny_cfg();
    cfg.epochs = 2;
    const auto train_set = tiny_dataset(6);

    GateNet<float> full(cfg.model, cfg.variant);
    full.init_params(cfg.seed);
    const TrainResult rf = train_model(full, cfg, train_set, {}, full_dir.string());

    // Interrupt after the first epoch (same schedule, stopped early).
    GateNet<float> part(cfg.model, cfg.variant);
    part.init_params(cfg.seed);
    train_model(part, cfg, train_set, {}, part_dir.string(), 0, /*stop_iter=*/3);

    GateNet<float> resumed(cfg.model, cfg.variant);
    const RawCheckpoint raw =
        load_checkpoint_raw((part_dir / "checkpoint.gnet").string());
    const std::uint64_t start = apply_checkpoint(raw, resumed);
    const TrainResult rr = train_model(resumed, cfg, train_set, {}, "", start);

    ASSERT_EQ(rf.log.size(), rr.log.size() + start);
    for (std::size_t i = 0; i < rr.log.size(); ++i) {
        EXPECT_EQ(rr.log[i].iter, rf.log[i + start].iter);
        EXPECT_EQ(rr.log[i].loss, rf.log[i + start].loss) << "iter " << rr.log[i].iter;
    }
    for (std::size_t i = 0; i < full.params().size(); ++i)
        EXPECT_EQ(full.params()[i].value, resumed.params()[i].value);
    fs::remove_all(full_dir);
    fs::remove_all(part_dir);
}

TEST(Train, LossDecreasesOnTinySyntheticSet) {
    TrainConfig cfg = tiny_cfg();
    cfg.epochs = 4;
    const auto train_set = tiny_dataset(8);
    GateNet<float> model(cfg.model, cfg.variant);
    model.init_params(cfg.seed);
    const TrainResult r = train_model(model, cfg, train_set, {}, "");
    EXPECT_LT(r.final_loss, r.initial_loss);
}

TEST(Config, CanonicalTextRoundTrips) {
    TrainConfig cfg = tiny_cfg();
    cfg.variant.aspp = AsppMode::aspp;
    cfg.variant.decoder = DecoderShape::progressive;
    cfg.base_lr = 0.0025;
    const std::string text = config_to_text(cfg);
    const TrainConfig back = config_from_text(text);
    EXPECT_EQ(config_to_text(back), text);
    EXPECT_EQ(back.variant.aspp, AsppMode::aspp);
    EXPECT_DOUBLE_EQ(back.base_lr, 0.0025);
}

TEST(Config, UnknownKeyAndBadValuesRejected) {
    TrainConfig cfg;
    EXPECT_THROW(apply_config_key(cfg, "nonsense.key", "1"), std::invalid_argument);
    EXPECT_THROW(apply_config_key(cfg, "train.batch", "four"), std::invalid_argument);
    EXPECT_THROW(apply_config_key(cfg, "variant.aspp", "pyramids"), std::invalid_argument);
}

TEST(Config, CommentsAndBlankLinesIgnored) {
    TrainConfig cfg;
    apply_config_text(cfg, "# header\n\ntrain.batch = 8  # inline\n");
    EXPECT_EQ(cfg.batch, 8);
}
