#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "catvil/config.hpp"
#include "catvil/errors.hpp"
#include "catvil/model.hpp"

using namespace catvil;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.dim = 8;
  c.heads = 2;
  c.ffn_hidden = 16;
  c.coattn_depth = 1;
  c.encoder_depth = 1;
  c.image_size = 32;
  c.patch_size = 8;
  c.text_length = 8;
  return c;
}

Vocabulary small_vocab() {
  std::vector<std::string> corpus{"what organ is shown", "which tool"};
  return Vocabulary::build(corpus);
}

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("catvil_model_" + name); }

}  // namespace

TEST(Config, ParsesKeysAndComments) {
  TrainConfig c = parse_config(
      "# comment\n"
      "epochs = 3\n"
      "learning_rate = 0.002\n"
      "\n"
      "dim = 16\n"
      "fusion = concat\n"
      "gate_mode = scalar\n"
      "giou_weight = 2.5\n"
      "train_data = /tmp/x\n");
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.learning_rate, 0.002);
  EXPECT_EQ(c.model.dim, 16);
  EXPECT_EQ(c.model.strategy, FusionStrategy::kConcat);
  EXPECT_EQ(c.model.gate_mode, GateMode::kScalar);
  EXPECT_EQ(c.weights.giou, 2.5);
  EXPECT_EQ(c.train_data, "/tmp/x");
}

TEST(Config, PresetAppliesFirst) {
  TrainConfig paper = preset_config("paper");
  EXPECT_EQ(paper.epochs, 80);
  EXPECT_EQ(paper.batch_size, 64);
  EXPECT_EQ(paper.learning_rate, 1e-5);
  EXPECT_EQ(paper.model.coattn_depth, 6);
  TrainConfig c = parse_config("epochs = 2\npreset = paper\n");
  EXPECT_EQ(c.epochs, 2);
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_THROW(preset_config("huge"), std::invalid_argument);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config("epochz = 3\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("epochs = three\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("epochs 3\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("fusion = magic\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("batch_size = 0\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("learning_rate = 0\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("dim = 10\nheads = 4\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("image_size = 60\npatch_size = 8\n"), std::invalid_argument);
  EXPECT_THROW(load_config(scratch("nope.cfg")), std::runtime_error);
}

TEST(Config, TextRoundTrip) {
  TrainConfig c = parse_config("epochs = 7\nseed = 99\nencoder = conv\nl1_weight = 0.5\nout_dir = somewhere\n");
  TrainConfig back = parse_config(c.to_text());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(ModelConfigJson, RoundTrip) {
  ModelConfig c = tiny_model();
  c.strategy = FusionStrategy::kCatvilBi;
  EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
}

TEST(Checkpoint, SaveLoadIsBitExact) {
  VqlaModel m(tiny_model(), small_vocab());
  m.init(17);
  const fs::path path = scratch("ckpt.bin");
  m.save(path);
  VqlaModel back = VqlaModel::load(path);
  EXPECT_EQ(back.config(), m.config());
  EXPECT_TRUE(back.vocab() == m.vocab());
  EXPECT_EQ(back.seed(), 17u);
  ParamList a = m.parameters(), b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_TRUE(a[i].param->value == b[i].param->value) << a[i].name;
  }
  Image img = generate_sample(1, 0, 32).image;
  Prediction pa = m.predict(img, "what organ is shown");
  Prediction pb = back.predict(img, "what organ is shown");
  EXPECT_TRUE(pa.probs == pb.probs);
  fs::remove(path);
}

TEST(Checkpoint, CorruptFilesRaiseFormatError) {
  VqlaModel m(tiny_model(), small_vocab());
  m.init(3);
  const fs::path path = scratch("bad.bin");
  m.save(path);
  const auto size = fs::file_size(path);

  fs::resize_file(path, size - 5);
  EXPECT_THROW(VqlaModel::load(path), FormatError);

  m.save(path);
  {
    std::ofstream os(path, std::ios::binary | std::ios::app);
    os << "x";
  }
  EXPECT_THROW(VqlaModel::load(path), FormatError);

  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "NOTACKPT and more bytes";
  }
  EXPECT_THROW(VqlaModel::load(path), FormatError);
  fs::remove(path);
}

TEST(Model, ForwardShapesAndDeterministicInit) {
  VqlaModel a(tiny_model(), small_vocab()), b(tiny_model(), small_vocab());
  a.init(5);
  b.init(5);
  Image img = generate_sample(2, 0, 32).image;
  EXPECT_TRUE(a.predict(img, "which tool").probs == b.predict(img, "which tool").probs);
  ad::Graph g;
  ForwardOutput out = a.forward(g, img, "which tool");
  EXPECT_EQ(out.logits.cols(), kNumClasses);
  EXPECT_EQ(out.box.cols(), 4);
  EXPECT_GT(a.parameter_count(), 0u);
}

TEST(Model, EveryStrategyRuns) {
  Image img = generate_sample(2, 1, 32).image;
  for (FusionStrategy s : all_fusion_strategies()) {
    ModelConfig c = tiny_model();
    c.strategy = s;
    VqlaModel m(c, small_vocab());
    m.init(1);
    Prediction p = m.predict(img, "what organ");
    EXPECT_NEAR(p.probs.sum(), 1.0, 1e-12) << to_string(s);
  }
}
