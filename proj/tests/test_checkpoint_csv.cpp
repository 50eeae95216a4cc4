#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cotlsa/checkpoint.hpp"
#include "cotlsa/csv.hpp"
#include "cotlsa/errors.hpp"

using namespace cotlsa;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cotlsa_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Checkpoint, RoundTripWithSidecar) {
  RngStream rng(1);
  LsaParams p = LsaParams::zeros(3);
  p.v = gaussian_matrix(rng, 8, 8);
  p.w = gaussian_matrix(rng, 8, 8);
  const fs::path path = temp_file("rt.lsa");
  write_checkpoint(path.string(), p, CheckpointMeta{3, 7, 0.4, 5, 99, 12});
  CheckpointMeta meta;
  const LsaParams back = read_checkpoint(path.string(), &meta);
  EXPECT_EQ(back.d, 3u);
  EXPECT_EQ(back.v, p.v);
  EXPECT_EQ(back.w, p.w);
  EXPECT_EQ(meta.n, 7u);
  EXPECT_EQ(meta.k, 5u);
  EXPECT_EQ(meta.seed, 99u);
  EXPECT_EQ(meta.step, 12);
  EXPECT_DOUBLE_EQ(meta.eta, 0.4);
  EXPECT_EQ(fs::file_size(path), 16u + 2u * 64u * 8u);
}

TEST(Checkpoint, HeaderBytes) {
  const fs::path path = temp_file("hdr.lsa");
  write_checkpoint(path.string(), LsaParams::zeros(2), CheckpointMeta{2, 4, 0.4, 1, 0, 0});
  std::ifstream in(path, std::ios::binary);
  unsigned char h[16];
  in.read(reinterpret_cast<char*>(h), 16);
  EXPECT_EQ(std::string(reinterpret_cast<char*>(h), 4), "LSA1");
  EXPECT_EQ(h[4], 2);
  EXPECT_EQ(h[5] | h[6] | h[7], 0);
  for (int i = 8; i < 16; ++i) EXPECT_EQ(h[i], 0);
}

TEST(Checkpoint, SidecarOptional) {
  const fs::path path = temp_file("nosidecar.lsa");
  write_checkpoint(path.string(), LsaParams::zeros(1), CheckpointMeta{1, 2, 0.4, 1, 0, 0});
  fs::remove(sidecar_path(path.string()));
  CheckpointMeta meta;
  EXPECT_NO_THROW(read_checkpoint(path.string(), &meta));
  EXPECT_EQ(meta.d, 1u);
  EXPECT_EQ(meta.n, 0u);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  EXPECT_THROW(read_checkpoint(temp_file("missing.lsa").string()), BadCheckpoint);

  const fs::path magic = temp_file("magic.lsa");
  {
    std::ofstream out(magic, std::ios::binary);
    out << "NOPE0000000000000000";
  }
  EXPECT_THROW(read_checkpoint(magic.string()), BadCheckpoint);

  const fs::path trunc = temp_file("trunc.lsa");
  write_checkpoint(trunc.string(), LsaParams::zeros(2), CheckpointMeta{2, 4, 0.4, 1, 0, 0});
  fs::resize_file(trunc, fs::file_size(trunc) - 8);
  EXPECT_THROW(read_checkpoint(trunc.string()), BadCheckpoint);

  const fs::path extra = temp_file("extra.lsa");
  write_checkpoint(extra.string(), LsaParams::zeros(2), CheckpointMeta{2, 4, 0.4, 1, 0, 0});
  {
    std::ofstream out(extra, std::ios::binary | std::ios::app);
    out << "x";
  }
  EXPECT_THROW(read_checkpoint(extra.string()), BadCheckpoint);
}

TEST(Csv, SchemaLineAndRoundTrip) {
  std::stringstream buf;
  {
    CsvWriter w(buf, {"a", "b", "c"});
    w.row({"1", "x,y", "say \"hi\""});
    w.row({format_number(0.1), format_number(std::size_t{7}), ""});
  }
  const std::string text = buf.str();
  EXPECT_EQ(text.rfind("# schema=1\na,b,c\n", 0), 0u);
  const CsvTable t = read_csv(buf);
  EXPECT_EQ(t.schema, 1);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "c"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "x,y");
  EXPECT_EQ(t.rows[0][2], "say \"hi\"");
  EXPECT_EQ(t.rows[1][0], "0.1");
  EXPECT_EQ(t.rows[1][2], "");
}

TEST(Csv, AppendModeSkipsHeader) {
  std::stringstream buf;
  CsvWriter w(buf, {"a"}, false);
  w.row({"5"});
  EXPECT_EQ(buf.str(), "5\n");
}

TEST(Csv, RejectsMissingOrUnknownSchema) {
  std::stringstream none("a,b\n1,2\n");
  EXPECT_THROW(read_csv(none), Error);
  std::stringstream future("# schema=2\na\n1\n");
  EXPECT_THROW(read_csv(future), Error);
}

TEST(Csv, RowWidthChecked) {
  std::stringstream buf;
  CsvWriter w(buf, {"a", "b"});
  EXPECT_THROW(w.row({"1"}), DimensionMismatch);
}

TEST(Csv, NumbersRoundTripExactly) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(-4L), "-4");
}
