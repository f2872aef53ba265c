#include <cstring>
#include <sstream>

#include <gtest/gtest.h>

#include "repe/actstore.hpp"
#include "test_util.hpp"

using namespace repe;

namespace {

ActivationSet small_set() {
  ActivationSet s;
  s.n_layers = 3;
  s.dim = 4;
  s.model_id = "unit";
  for (int pol : {1, 0}) {
    RecordMeta r;
    r.record_id = pol ? "a/pos" : "a/neg";
    r.labels[Factor::superiority] = pol;
    r.pair_id = "a";
    r.polarity = pol ? Polarity::pos : Polarity::neg;
    s.records.push_back(r);
  }
  for (std::size_t i = 0; i < 2 * 3 * 4; ++i) s.tensor.push_back(0.25f * static_cast<float>(i));
  return s;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::invalid_argument;
}

void put_u32_at(std::vector<std::uint8_t>& buf, std::size_t off, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf[off + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

} // namespace

TEST(Acf, HeaderAndPayloadSizes) {
  const auto s = small_set();
  std::ostringstream out;
  const std::size_t n = save_acf(s, out);
  const std::string bytes = out.str();
  ASSERT_EQ(n, bytes.size());
  EXPECT_EQ(bytes.substr(0, 4), "ACF1");
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data());
  EXPECT_EQ(bytes::get_u32(p + 4), 2u);
  EXPECT_EQ(bytes::get_u32(p + 8), 3u);
  EXPECT_EQ(bytes::get_u32(p + 12), 4u);
  const std::uint32_t m = bytes::get_u32(p + 16);
  EXPECT_EQ(bytes.size() - acf_header_bytes - m, 96u);
}

TEST(Acf, LittleEndianFloatsOnDisk) {
  auto s = small_set();
  s.tensor[0] = 1.0f; // 0x3f800000
  const auto buf = encode_acf(s);
  const std::uint32_t m = bytes::get_u32(buf.data() + 16);
  const auto* f0 = buf.data() + acf_header_bytes + m;
  EXPECT_EQ(f0[0], 0x00);
  EXPECT_EQ(f0[1], 0x00);
  EXPECT_EQ(f0[2], 0x80);
  EXPECT_EQ(f0[3], 0x3f);
}

TEST(Acf, EmptySetIsValid) {
  ActivationSet s;
  s.n_layers = 2;
  s.dim = 3;
  const auto buf = encode_acf(s);
  const auto back = decode_acf(buf);
  EXPECT_EQ(back.size(), 0u);
  EXPECT_EQ(back.n_layers, 2u);
  EXPECT_EQ(back.dim, 3u);
  EXPECT_EQ(buf.size(), acf_header_bytes + bytes::get_u32(buf.data() + 16));
}

TEST(Acf, RoundTripBitExactRandomized) {
  std::mt19937_64 rng(0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = testkit::random_set(rng);
    const auto buf = encode_acf(s);
    const auto back = decode_acf(buf);
    ASSERT_EQ(back.tensor.size(), s.tensor.size());
    EXPECT_EQ(std::memcmp(back.tensor.data(), s.tensor.data(), 4 * s.tensor.size()), 0) << "trial " << trial;
    EXPECT_EQ(back, s) << "trial " << trial;
    EXPECT_EQ(encode_acf(back), buf) << "load then save changed bytes, trial " << trial;
  }
}

TEST(Acf, SpecialFloatsSurvive) {
  auto s = small_set();
  s.tensor[1] = -0.0f;
  s.tensor[2] = std::numeric_limits<float>::denorm_min();
  s.tensor[3] = std::numeric_limits<float>::infinity();
  s.tensor[4] = std::numeric_limits<float>::quiet_NaN();
  const auto back = decode_acf(encode_acf(s));
  EXPECT_EQ(std::memcmp(back.tensor.data(), s.tensor.data(), 4 * s.tensor.size()), 0);
}

TEST(Acf, FileRoundTrip) {
  testkit::TempDir dir("acf");
  std::mt19937_64 rng(7);
  const auto s = testkit::random_set(rng);
  const auto n = save_acf(s, dir.file("x.acf"));
  EXPECT_EQ(n, std::filesystem::file_size(dir.file("x.acf")));
  EXPECT_EQ(load_acf(dir.file("x.acf")), s);
}

TEST(Acf, MissingFile) {
  EXPECT_EQ(kind_of([] { load_acf(std::string("/nonexistent/nowhere.acf")); }), ErrorKind::missing_input);
}

TEST(Acf, BadMagic) {
  auto buf = encode_acf(small_set());
  buf[3] = '2';
  EXPECT_EQ(kind_of([&] { decode_acf(buf); }), ErrorKind::bad_magic);
  EXPECT_EQ(kind_of([] { decode_acf(std::vector<std::uint8_t>{'A', 'C'}); }), ErrorKind::bad_magic);
}

TEST(Acf, TruncationAtEveryCutNamesByteCounts) {
  const auto buf = encode_acf(small_set());
  for (std::size_t k = 4; k < buf.size(); ++k) {
    const std::vector<std::uint8_t> cut(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k));
    try {
      decode_acf(cut);
      FAIL() << "cut at " << k << " decoded";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::truncated) << "cut at " << k;
      if (k >= acf_header_bytes) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find(std::to_string(buf.size())), std::string::npos) << msg;
        EXPECT_NE(msg.find(std::to_string(k)), std::string::npos) << msg;
      }
    }
  }
}

TEST(Acf, TrailingBytesRejected) {
  auto buf = encode_acf(small_set());
  buf.push_back(0);
  EXPECT_EQ(kind_of([&] { decode_acf(buf); }), ErrorKind::trailing_data);
}

TEST(Acf, MetadataViolationsAreDistinct) {
  auto with_meta = [](const std::string& meta, std::uint32_t n, std::uint32_t l, std::uint32_t d) {
    std::vector<std::uint8_t> buf{'A', 'C', 'F', '1'};
    bytes::put_u32(buf, n);
    bytes::put_u32(buf, l);
    bytes::put_u32(buf, d);
    bytes::put_u32(buf, static_cast<std::uint32_t>(meta.size()));
    buf.insert(buf.end(), meta.begin(), meta.end());
    for (std::uint32_t i = 0; i < n * l * d; ++i) bytes::put_f32(buf, 0.0f);
    return buf;
  };
  // Not JSON.
  EXPECT_EQ(kind_of([&] { decode_acf(with_meta("{oops", 0, 1, 1)); }), ErrorKind::invalid_metadata);
  // Record count mismatch.
  EXPECT_EQ(kind_of([&] { decode_acf(with_meta(R"({"records":[]})", 1, 1, 1)); }), ErrorKind::invalid_metadata);
  // Duplicate ids.
  EXPECT_EQ(kind_of([&] { decode_acf(with_meta(R"({"records":[{"record_id":"a"},{"record_id":"a"}]})", 2, 1, 1)); }),
            ErrorKind::invalid_metadata);
  // Label outside {0,1}.
  EXPECT_EQ(kind_of([&] { decode_acf(with_meta(R"({"records":[{"record_id":"a","labels":{"weekday":2}}]})", 1, 1, 1)); }),
            ErrorKind::invalid_metadata);
  // Unknown factor name.
  EXPECT_EQ(kind_of([&] { decode_acf(with_meta(R"({"records":[{"record_id":"a","labels":{"similarity":1}}]})", 1, 1, 1)); }),
            ErrorKind::invalid_metadata);
  // Ground truth out of range.
  EXPECT_EQ(kind_of([&] { decode_acf(with_meta(R"({"records":[{"record_id":"a","ground_truth":6}]})", 1, 1, 1)); }),
            ErrorKind::invalid_metadata);
  // Half a pair.
  EXPECT_EQ(kind_of([&] { decode_acf(with_meta(R"({"records":[{"record_id":"a","pair_id":"p","polarity":"pos"}]})", 1, 1, 1)); }),
            ErrorKind::invalid_metadata);
}

TEST(Acf, HeaderCountMismatchIsTruncationNotCrash) {
  auto buf = encode_acf(small_set());
  put_u32_at(buf, 12, 1000); // inflate d
  EXPECT_EQ(kind_of([&] { decode_acf(buf); }), ErrorKind::truncated);
}

TEST(Acf, InvalidSetIsRejectedBeforeWriting) {
  auto s = small_set();
  s.tensor.pop_back();
  std::ostringstream out;
  EXPECT_EQ(kind_of([&] { save_acf(s, out); }), ErrorKind::invalid_metadata);
  EXPECT_TRUE(out.str().empty());
}

TEST(Acf, ExtraMetadataKeysPreserved) {
  auto s = small_set();
  s.extra["tokenizer"] = "bpe";
  s.extra["layer_indexing"] = "0 = embeddings";
  const auto back = decode_acf(encode_acf(s));
  EXPECT_EQ(back.extra, s.extra);
}

TEST(SelectLayer, LastLayerAndOutOfRange) {
  const auto s = small_set();
  const auto sl = select_layer(s, 2);
  ASSERT_EQ(sl.values.rows(), 2);
  ASSERT_EQ(sl.values.cols(), 4);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(sl.values(i, k), s.at(i, 2, k));
  EXPECT_EQ(sl.records[0].record_id, "a/pos");
  EXPECT_EQ(kind_of([&] { select_layer(s, 3); }), ErrorKind::out_of_range);
}

TEST(SelectLayer, RoundTrippedSliceMatchesOriginal) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = testkit::random_set(rng);
    const auto back = decode_acf(encode_acf(s));
    for (std::size_t l = 0; l < s.n_layers; ++l) {
      const auto a = select_layer(s, l), b = select_layer(back, l);
      EXPECT_EQ(a.values, b.values);
      for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(a.records[i].record_id, b.records[i].record_id);
    }
  }
}

TEST(SelectLayer, FindRecord) {
  const auto s = small_set();
  EXPECT_EQ(find_record(s, "a/neg"), 1u);
  EXPECT_FALSE(find_record(s, "zzz").has_value());
}
