#include <catch_amalgamated.hpp>

#include <sms/model_db.hpp>

#include <temp_dir.hpp>

using sms::ErrorCode;
using sms::ModelCandidate;
using sms::ModelDatabase;
using sms::ModelKind;
using sms::testing::TempDir;
using sms::testing::write_text;

namespace {

ModelCandidate logits_candidate(const std::string& id, int dim, const std::filesystem::path& file) {
  ModelCandidate c;
  c.id = id;
  c.output_dim = dim;
  c.kind = ModelKind::LogitsFile;
  c.path = file;
  return c;
}

ErrorCode register_error(ModelDatabase& db, ModelCandidate c) {
  try {
    db.register_model(std::move(c));
  } catch (const sms::Error& e) {
    return e.code();
  }
  FAIL("registration should have failed");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("empty database lists nothing", "[model-db]") {
  TempDir dir;
  const auto db = ModelDatabase::open(dir / "db");
  CHECK(db.list().empty());
  CHECK_FALSE(std::filesystem::exists(db.manifest_path()));
}

TEST_CASE("register stores the file and preserves order", "[model-db]") {
  TempDir dir;
  write_text(dir / "src/a.csv", "z0,z1,z2\n1,2,3\n");
  write_text(dir / "src/b.csv", "z0,z1,z2\n3,2,1\n");
  auto db = ModelDatabase::open(dir / "db");

  const auto& m1 = db.register_model(logits_candidate("m1", 3, dir / "src/a.csv"));
  CHECK(db.list().size() == 1);
  CHECK(m1.path == std::filesystem::path("models/m1.csv"));
  CHECK(std::filesystem::exists(dir / "db/models/m1.csv"));

  auto c2 = logits_candidate("m2", 3, dir / "src/b.csv");
  c2.metadata["arch"] = "resnet18";
  db.register_model(c2);

  const auto reloaded = ModelDatabase::open(dir / "db");
  REQUIRE(reloaded.list().size() == 2);
  CHECK(reloaded.list()[0].id == "m1");
  CHECK(reloaded.list()[1].id == "m2");
  CHECK(reloaded.list()[1].metadata.at("arch") == "resnet18");
  CHECK(reloaded.get("m2").output_dim == 3);
  CHECK(reloaded.find("nope") == nullptr);
  CHECK_THROWS_AS(reloaded.get("nope"), sms::Error);
}

TEST_CASE("register rejections", "[model-db]") {
  TempDir dir;
  write_text(dir / "a.csv", "z0,z1,z2\n1,2,3\n");
  write_text(dir / "four.csv", "z0,z1,z2,z3\n1,2,3,4\n");
  auto db = ModelDatabase::open(dir / "db");
  db.register_model(logits_candidate("m1", 3, dir / "a.csv"));

  CHECK(register_error(db, logits_candidate("m1", 3, dir / "a.csv")) == ErrorCode::DuplicateId);
  CHECK(register_error(db, logits_candidate("m4", 3, dir / "four.csv")) == ErrorCode::DimensionMismatch);
  CHECK(register_error(db, logits_candidate("mx", 3, dir / "absent.csv")) == ErrorCode::FileUnreadable);
  CHECK(register_error(db, logits_candidate("m0", 1, dir / "a.csv")) == ErrorCode::InvalidArgument);
  CHECK(register_error(db, logits_candidate("../evil", 3, dir / "a.csv")) == ErrorCode::InvalidArgument);
  // failed registrations leave the manifest untouched
  CHECK(ModelDatabase::open(dir / "db").list().size() == 1);
}

TEST_CASE("predictor candidates", "[model-db]") {
  TempDir dir;
  write_text(dir / "affine.json", R"({"layers":[{"W":[[1,0],[0,1],[1,1]],"b":[0,0,0]}]})");
  write_text(dir / "mlp.json", R"({"layers":[{"W":[[1,0],[0,1]],"b":[0,0],"activation":"relu"},{"W":[[1,0],[0,1],[1,1]],"b":[0,0,0]}]})");
  auto db = ModelDatabase::open(dir / "db");

  ModelCandidate a{"aff", 3, ModelKind::AffinePredictor, dir / "affine.json", {}};
  db.register_model(a);
  CHECK(std::filesystem::exists(dir / "db/models/aff.weights.json"));

  ModelCandidate bad{"aff2", 3, ModelKind::AffinePredictor, dir / "mlp.json", {}};
  CHECK(register_error(db, bad) == ErrorCode::ParseError);

  ModelCandidate m{"mlp", 3, ModelKind::MlpPredictor, dir / "mlp.json", {}};
  db.register_model(m);
  CHECK(ModelDatabase::open(dir / "db").list().size() == 2);
}

TEST_CASE("manifest save/load is the identity", "[model-db][property]") {
  TempDir dir;
  std::vector<ModelCandidate> candidates;
  for (int i = 0; i < 12; ++i) {
    ModelCandidate c;
    c.id = "cand-" + std::to_string(i);
    c.output_dim = 2 + i;
    c.kind = static_cast<ModelKind>(i % 3);
    c.path = "models/cand-" + std::to_string(i) + (i % 3 ? ".weights.json" : ".csv");
    if (i % 2) c.metadata = {{"source", "sub-" + std::to_string(i)}, {"quote\"d", "line\nbreak"}};
    candidates.push_back(c);
    ModelDatabase::write_manifest(dir / "manifest.json", candidates);
    const auto back = ModelDatabase::read_manifest(dir / "manifest.json");
    REQUIRE(back == candidates);
    ModelDatabase::write_manifest(dir / "again.json", back);
    REQUIRE(sms::detail::read_file(dir / "again.json") == sms::detail::read_file(dir / "manifest.json"));
  }
}

TEST_CASE("corrupt manifest names the offending line", "[model-db]") {
  TempDir dir;
  write_text(dir / "db/manifest.json",
             "{\n"
             "  \"version\": 1,\n"
             "  \"candidates\": [\n"
             "    {\"id\":\"m1\",\"output_dim\":3,\"kind\":\"logits-file\",\"path\":\"models/m1.csv\",\"metadata\":{}},\n"
             "    {\"id\":\"m2\",\"output_dim\":\"three\",\"kind\":\"logits-file\",\"path\":\"models/m2.csv\",\"metadata\":{}}\n"
             "  ]\n"
             "}\n");
  try {
    ModelDatabase::open(dir / "db");
    FAIL("corrupt manifest accepted");
  } catch (const sms::Error& e) {
    CHECK(e.code() == ErrorCode::CorruptManifest);
    CHECK(std::string(e.what()).find("manifest.json:5:") != std::string::npos);
  }

  write_text(dir / "db2/manifest.json", "{\n  \"candidates\": [\n    {\"id\": \"m1\",,}\n  ]\n}\n");
  try {
    ModelDatabase::open(dir / "db2");
    FAIL("unparseable manifest accepted");
  } catch (const sms::Error& e) {
    CHECK(e.code() == ErrorCode::CorruptManifest);
    CHECK(std::string(e.what()).find("manifest.json:3:") != std::string::npos);
  }

  write_text(dir / "db3/manifest.json", "{\"candidates\": [{\"id\":\"m1\",\"output_dim\":3,\"kind\":\"bogus\",\"path\":\"x\",\"metadata\":{}}]}");
  try {
    ModelDatabase::open(dir / "db3");
    FAIL("unknown kind accepted");
  } catch (const sms::Error& e) {
    CHECK(e.code() == ErrorCode::CorruptManifest);
  }
}
