#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "synthetic.hpp"
#include "volcal/calibrate.hpp"
#include "volcal/error.hpp"
#include "volcal/model_io.hpp"

using namespace volcal;

namespace {

ModelBundle sample_direct() {
    const auto ds = synthetic_dataset(60, 0, 4);
    DirectCalibrator c;
    c.grid = ds.spec.grid;
    c.scaler = ParameterScaler{ds.spec.bounds};
    c.whitener = fit_whitener(ds.X);
    c.spec = MlpSpec{{6, 5, 5}, OutputActivation::sigmoid};
    c.weights = init_weights(c.spec, 9);
    c.weights.layers[0].b[2] = 0.1 / 3.0;
    return to_bundle(c);
}

ModelFileError::Kind load_error(const std::string& bytes) {
    try {
        deserialize_model(bytes);
    } catch (const ModelFileError& e) {
        return e.kind();
    }
    FAIL("expected a ModelFileError");
    return ModelFileError::Kind::malformed;
}

}  // namespace

TEST_SUITE("model_io") {

TEST_CASE("FNV-1a reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("round trip is exact") {
    const ModelBundle m = sample_direct();
    const std::string bytes = serialize_model(m);
    const ModelBundle back = deserialize_model(bytes);
    CHECK(back == m);
    CHECK(serialize_model(back) == bytes);
    const auto ds = synthetic_dataset(5, 0, 5);
    const DirectCalibrator a = direct_from_bundle(m), b = direct_from_bundle(back);
    CHECK(direct_calibrate(a, ds.X) == direct_calibrate(b, ds.X));
}

TEST_CASE("file round trip") {
    const auto path = std::filesystem::temp_directory_path() / "volcal_model_io_test.model";
    const ModelBundle m = sample_direct();
    save_model(path, m);
    CHECK(load_model(path) == m);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_model(path), Error);
}

TEST_CASE("pricing bundles carry no whitener") {
    PricingNetwork p;
    p.grid = tiny_grid();
    p.scaler = ParameterScaler{ParamBounds::defaults(ModelKind::heston)};
    p.spec = MlpSpec{{5, 4, 6}, OutputActivation::identity};
    p.weights = init_weights(p.spec, 2);
    const ModelBundle back = deserialize_model(serialize_model(to_bundle(p)));
    CHECK_FALSE(back.whitener.has_value());
    CHECK(back.role == ModelRole::pricing);
    CHECK_THROWS_AS(direct_from_bundle(back), ValidationError);
    CHECK_THROWS_AS(pricing_from_bundle(sample_direct()), ValidationError);
}

TEST_CASE("damaged files are classified") {
    const std::string bytes = serialize_model(sample_direct());
    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x01;
    CHECK(load_error(flipped) == ModelFileError::Kind::checksum);
    CHECK(load_error(bytes.substr(0, bytes.size() - 10)) == ModelFileError::Kind::truncated);
    CHECK(load_error(bytes.substr(0, 8)) == ModelFileError::Kind::truncated);
    std::string v2 = bytes;
    v2.replace(0, 15, "volcal-model v2");
    CHECK(load_error(v2) == ModelFileError::Kind::version);
    CHECK(load_error("hello\nworld\n") == ModelFileError::Kind::malformed);
    CHECK(load_error(bytes + "x") == ModelFileError::Kind::malformed);
    const std::string body = "{\"role\":\"direct\"}";
    char header[96];
    std::snprintf(header, sizeof header, "volcal-model v1\nlength %zu checksum %016llx\n", body.size(),
                  static_cast<unsigned long long>(fnv1a64(body)));
    CHECK(load_error(header + body) == ModelFileError::Kind::malformed);
}

}  // TEST_SUITE
