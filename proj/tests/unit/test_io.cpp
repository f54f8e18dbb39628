#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "srcv/errors.hpp"
#include "srcv/io/binary.hpp"
#include "srcv/io/captions.hpp"
#include "srcv/io/checkpoint.hpp"
#include "srcv/io/dataset.hpp"
#include "srcv/io/features.hpp"
#include "srcv/io/files.hpp"
#include "srcv/io/synth.hpp"
#include "srcv/random.hpp"
#include "support.hpp"

using namespace srcv;
using namespace srcv::io;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

Matrix float_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = static_cast<float>(rng.normal());
  return m;
}

FeatureArchive small_archive() {
  Rng rng(1);
  FeatureArchive a({"rgb", "flow"});
  a.add({"clip_a", {float_matrix(2, 3, rng), float_matrix(2, 3, rng)}});
  a.add({"clip_b", {float_matrix(2, 3, rng), float_matrix(2, 3, rng)}});
  return a;
}

}  // namespace

TEST_CASE("caption csv") {
  std::istringstream in(
      "id,video_id,narration,verb_class,noun_classes\n"
      "a,v1,cut the tomato,0,2 5\n"
      "b,v2,\"wash, then dry\",3,1\n"
      "c,v3,\"say \"\"hi\"\"\",1,4 4 0\n");
  const auto caps = parse_captions(in);
  REQUIRE(caps.size() == 3);
  CHECK(caps[0].id == "a");
  CHECK(caps[0].noun_classes == std::vector<std::size_t>{2, 5});
  CHECK(caps[1].text == "wash, then dry");
  CHECK(caps[1].verb_class == 3);
  CHECK(caps[2].text == "say \"hi\"");
  CHECK(caps[2].noun_classes == std::vector<std::size_t>{0, 4});

  std::ostringstream out;
  write_captions(out, caps);
  std::istringstream again(out.str());
  const auto back = parse_captions(again);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == caps[i].id);
    CHECK(back[i].text == caps[i].text);
    CHECK(back[i].noun_classes == caps[i].noun_classes);
  }
}

TEST_CASE("caption csv errors") {
  std::istringstream dup("id,video_id,narration,verb_class,noun_classes\na,v,x,0,1\na,v,y,0,1\n");
  try {
    parse_captions(dup);
    FAIL("expected DuplicateId");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DuplicateId);
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
  std::istringstream neg("id,video_id,narration,verb_class,noun_classes\na,v,x,-1,1\n");
  try {
    parse_captions(neg, "caps.csv");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("caps.csv:2") != std::string::npos);
  }
  std::istringstream header("id,video,narration\n");
  CHECK(kind_of([&] { parse_captions(header); }) == ErrorKind::Parse);
  std::istringstream fields("id,video_id,narration,verb_class,noun_classes\na,v,x,1\n");
  CHECK(kind_of([&] { parse_captions(fields); }) == ErrorKind::Parse);
}

TEST_CASE("temporal pooling") {
  const Matrix m = Matrix::from_rows({{1, 3}, {3, 5}});
  CHECK(temporal_pool(m, Pooling::mean) == std::vector<double>{2, 4});
  CHECK(temporal_pool(m, Pooling::max) == std::vector<double>{3, 5});
  const Matrix one = Matrix::from_rows({{0.1, -7}});
  CHECK(temporal_pool(one, Pooling::mean) == std::vector<double>{0.1, -7});
  CHECK(temporal_pool(one, Pooling::max) == std::vector<double>{0.1, -7});
  CHECK(kind_of([] { temporal_pool(Matrix(0, 3), Pooling::mean); }) == ErrorKind::EmptyMatrix);

  Rng rng(4);
  Matrix x(7, 5);
  for (double& v : x.values()) v = rng.normal() * 1e3;
  for (int t = 0; t < 20; ++t) {
    Matrix p(7, 5);
    std::vector<std::size_t> perm = {0, 1, 2, 3, 4, 5, 6};
    for (std::size_t i = 7; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    for (std::size_t r = 0; r < 7; ++r)
      for (std::size_t c = 0; c < 5; ++c) p(r, c) = x(perm[r], c);
    CHECK(temporal_pool(p, Pooling::mean) == temporal_pool(x, Pooling::mean));
    CHECK(temporal_pool(p, Pooling::max) == temporal_pool(x, Pooling::max));
  }
}

TEST_CASE("feature archive round trip") {
  const FeatureArchive a = small_archive();
  const auto bytes = encode_features(a);
  CHECK(std::memcmp(bytes.data(), "SRCV", 4) == 0);
  CHECK(decode_features(bytes) == a);
  testing::TempDir dir("feat");
  save_features(dir / "f.bin", a);
  CHECK(load_features(dir / "f.bin") == a);
}

TEST_CASE("feature archive error fixtures") {
  const auto good = encode_features(small_archive());

  auto magic = good;
  magic[0] = 'X';
  CHECK(kind_of([&] { decode_features(magic); }) == ErrorKind::BadMagic);
  CHECK(kind_of([&] { decode_features(std::vector<char>{}); }) == ErrorKind::BadMagic);

  auto version = good;
  version[4] = 2;
  CHECK(kind_of([&] { decode_features(version); }) == ErrorKind::VersionMismatch);

  const std::vector<char> truncated(good.begin(), good.end() - 5);
  CHECK(kind_of([&] { decode_features(truncated); }) == ErrorKind::TruncatedPayload);
  const std::vector<char> header_only(good.begin(), good.begin() + 10);
  CHECK(kind_of([&] { decode_features(header_only); }) == ErrorKind::TruncatedPayload);

  auto nan = good;
  const float bad = NAN;
  std::memcpy(nan.data() + nan.size() - 4, &bad, 4);
  CHECK(kind_of([&] { decode_features(nan); }) == ErrorKind::NonFinite);

  // A second clip with the first clip's id.
  FeatureArchive a({"rgb"});
  Rng rng(2);
  a.add({"same", {float_matrix(1, 2, rng)}});
  CHECK(kind_of([&] { a.add({"same", {float_matrix(1, 2, rng)}}); }) == ErrorKind::DuplicateId);
  ByteWriter w;
  w.put_bytes("SRCV");
  w.put_uint<std::uint32_t>(1);
  w.put_uint<std::uint32_t>(2);
  w.put_uint<std::uint8_t>(1);
  w.put_uint<std::uint8_t>(1);
  w.put_bytes("m");
  for (int i = 0; i < 2; ++i) {
    w.put_uint<std::uint16_t>(1);
    w.put_bytes("z");
    w.put_uint<std::uint32_t>(1);
    w.put_uint<std::uint32_t>(1);
    w.put_f32(0.5f);
  }
  CHECK(kind_of([&] { decode_features(w.bytes()); }) == ErrorKind::DuplicateId);

  testing::TempDir dir("feat_err");
  CHECK(kind_of([&] { load_features(dir / "missing.bin"); }) == ErrorKind::Io);
}

TEST_CASE("checkpoint round trip and error fixtures") {
  ModelConfig c;
  c.word_dim = 6;
  c.feature_dim = 5;
  c.embed_dim = 4;
  c.model_dim = 8;
  c.heads = 2;
  c.text_self_attention = true;
  ModelParams p = init_params(c, 5);
  Rng rng(8);
  p.visit([&](const std::string&, Matrix& m) {
    for (double& v : m.values()) v = rng.normal();
  });
  testing::TempDir dir("ckpt");
  const auto manifest = dir / "model.json";
  save_checkpoint(p, manifest, {{"note", "x"}});
  CHECK(payload_path_for(manifest) == dir / "model.bin");
  std::map<std::string, std::string> meta;
  const ModelParams q = load_checkpoint(manifest, &meta);
  CHECK(meta.at("note") == "x");
  CHECK(q.config == p.config);
  std::vector<Matrix> pa, qa;
  p.visit([&](const std::string&, const Matrix& m) { pa.push_back(m); });
  q.visit([&](const std::string&, const Matrix& m) { qa.push_back(m); });
  CHECK(pa == qa);

  testing::write_text(dir / "empty.json", "");
  CHECK(kind_of([&] { load_checkpoint(dir / "empty.json"); }) == ErrorKind::BadMagic);
  testing::write_text(dir / "junk.json", "{not json");
  CHECK(kind_of([&] { load_checkpoint(dir / "junk.json"); }) == ErrorKind::BadMagic);

  const std::string text = testing::read_text(manifest);
  auto edited = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    const auto pos = t.find(from);
    REQUIRE(pos != std::string::npos);
    t.replace(pos, from.size(), to);
    testing::write_text(manifest, t);
  };
  edited("\"embed_dim\": 4", "\"embed_dim\": 6");
  CHECK(kind_of([&] { load_checkpoint(manifest); }) == ErrorKind::VersionMismatch);
  edited("\"version\": 1", "\"version\": 7");
  CHECK(kind_of([&] { load_checkpoint(manifest); }) == ErrorKind::VersionMismatch);
  testing::write_text(manifest, text);

  const std::string payload = testing::read_text(dir / "model.bin");
  testing::write_text(dir / "model.bin", payload.substr(0, payload.size() - 8));
  CHECK(kind_of([&] { load_checkpoint(manifest); }) == ErrorKind::TruncatedPayload);
  testing::write_text(dir / "model.bin", payload);
  CHECK_NOTHROW(load_checkpoint(manifest));
}

TEST_CASE("synthetic dataset") {
  const SynthDataset a = synth_dataset({});
  const SynthDataset b = synth_dataset({});
  CHECK(encode_features(a.features) == encode_features(b.features));
  std::ostringstream ca, cb;
  write_captions(ca, a.captions);
  write_captions(cb, b.captions);
  CHECK(ca.str() == cb.str());

  // Realized class histogram for the default SynthSpec (8 x 8 classes, 400 items,
  // seed 42), pinned from a reference run.
  std::vector<int> verbs(8), nouns(8);
  int two_nouns = 0;
  for (const auto& c : a.captions) {
    ++verbs[c.verb_class];
    for (auto n : c.noun_classes) ++nouns[n];
    two_nouns += c.noun_classes.size() == 2;
    CHECK(!c.noun_classes.empty());
    CHECK(c.noun_classes.size() <= 2);
  }
  CHECK(verbs == std::vector<int>(8, 50));
  CHECK(nouns == std::vector<int>{68, 73, 84, 75, 57, 91, 74, 82});
  CHECK(two_nouns == 204);
  for (int v : verbs) CHECK(std::abs(v - 50) <= 12);
  CHECK(a.captions[0].text == "wash the fridge");

  // Every caption tags to a verb and a noun.
  for (const auto& c : a.captions) {
    const auto roles = role_vectors(tag_roles(tokenize(c.text), a.lexicon), a.table);
    CHECK_FALSE(roles.missing_role());
  }

  SynthSpec zero;
  zero.n_items = 0;
  try {
    zero.validate();
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("items") != std::string::npos);
  }
  SynthSpec neg;
  neg.noise_sigma = -1;
  CHECK_THROWS_AS(neg.validate(), Error);
}

TEST_CASE("noiseless synthetic features separate classes exactly") {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  spec.n_items = 120;
  const SynthDataset d = synth_dataset(spec);
  for (std::size_t i = 0; i < d.captions.size(); ++i) {
    for (std::size_t j = i + 1; j < d.captions.size(); ++j) {
      const auto& ci = d.captions[i];
      const auto& cj = d.captions[j];
      const auto* fi = d.features.find(ci.video_id);
      const auto* fj = d.features.find(cj.video_id);
      double dist = 0;
      for (std::size_t m = 0; m < fi->modalities.size(); ++m) {
        const auto pi = temporal_pool(fi->modalities[m], Pooling::mean);
        const auto pj = temporal_pool(fj->modalities[m], Pooling::mean);
        for (std::size_t k = 0; k < pi.size(); ++k) dist += std::abs(pi[k] - pj[k]);
      }
      const bool same = ci.verb_class == cj.verb_class && ci.noun_classes == cj.noun_classes;
      if (same) {
        CHECK(dist == 0.0);
      } else {
        CHECK(dist > 0.0);
      }
    }
  }
}

TEST_CASE("dataset directory") {
  SynthSpec spec;
  spec.n_items = 20;
  spec.feature_dim = 8;
  spec.word_dim = 6;
  const SynthDataset s = synth_dataset(spec);
  testing::TempDir dir("data");
  write_dataset(dir.path(), s);
  const Dataset d = load_dataset(dir.path());
  CHECK(d.captions.size() == 20);
  CHECK(d.features == s.features);

  ModelConfig c;
  fill_data_dims(d, c);
  CHECK(c.word_dim == 6);
  CHECK(c.feature_dim == 8);
  CHECK(c.modalities == 3);
  c.embed_dim = 4;
  c.model_dim = 8;
  c.heads = 2;
  const PreparedSet prepared = prepare_items(d, c);
  CHECK(prepared.items.size() == 20);
  CHECK(prepared.items[0].tokens.rows() == 3);
  c.video_tokens = VideoTokens::segment;
  CHECK(prepare_items(d, c).items[0].tokens.rows() == 3 * spec.segments);

  ModelConfig wrong = c;
  wrong.feature_dim = 9;
  CHECK(kind_of([&] { prepare_items(d, wrong); }) == ErrorKind::Incompatible);

  std::filesystem::remove(dir / "features.bin");
  try {
    load_dataset(dir.path());
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
    CHECK(std::string(e.what()).find("features.bin") != std::string::npos);
  }
}
