#include "volcal/model_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "volcal/error.hpp"

namespace volcal {

namespace {

using nlohmann::json;
using Kind = ModelFileError::Kind;

constexpr std::string_view kFileMagic = "volcal-model v1";
constexpr std::string_view kFilePrefix = "volcal-model ";

json matrix_json(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from(const json& j) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) throw ModelFileError(Kind::malformed, "matrix data does not match its shape");
    return Matrix(rows, cols, std::move(data));
}

}  // namespace

std::string_view role_name(ModelRole r) { return r == ModelRole::direct ? "direct" : "pricing"; }

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string serialize_model(const ModelBundle& m) {
    check_shapes(m.spec, m.weights);
    json layers = json::array();
    for (const auto& l : m.weights.layers) layers.push_back({{"w", matrix_json(l.w)}, {"b", l.b}});
    json payload{
        {"role", role_name(m.role)},
        {"model", model_name(m.model)},
        {"layer_sizes", m.spec.layer_sizes},
        {"output_activation", activation_name(m.spec.output)},
        {"layers", layers},
        {"bounds_lb", m.scaler.bounds.lower},
        {"bounds_ub", m.scaler.bounds.upper},
        {"grid_strikes", m.grid.strikes},
        {"grid_maturities", m.grid.maturities},
    };
    if (m.whitener) {
        payload["whitener"] = {{"mean", m.whitener->mean},
                               {"w", matrix_json(m.whitener->w)},
                               {"w_inv", matrix_json(m.whitener->w_inv)},
                               {"eig_floor", m.whitener->eig_floor}};
    }
    const std::string body = payload.dump();
    char line[96];
    std::snprintf(line, sizeof line, "length %zu checksum %016" PRIx64 "\n", body.size(), fnv1a64(body));
    return std::string(kFileMagic) + "\n" + line + body;
}

ModelBundle deserialize_model(const std::string& bytes) {
    const auto nl1 = bytes.find('\n');
    if (nl1 == std::string::npos) throw ModelFileError(Kind::truncated, "model file ends inside its header");
    const std::string_view magic(bytes.data(), nl1);
    if (magic != kFileMagic) {
        if (magic.substr(0, kFilePrefix.size()) == kFilePrefix)
            throw ModelFileError(Kind::version, "unsupported model file version '" + std::string(magic) + "'");
        throw ModelFileError(Kind::malformed, "not a volcal model file");
    }
    const auto nl2 = bytes.find('\n', nl1 + 1);
    if (nl2 == std::string::npos) throw ModelFileError(Kind::truncated, "model file ends inside its header");
    const std::string meta = bytes.substr(nl1 + 1, nl2 - nl1 - 1);
    std::size_t length = 0;
    std::uint64_t checksum = 0;
    char tail = 0;
    if (std::sscanf(meta.c_str(), "length %zu checksum %" SCNx64 "%c", &length, &checksum, &tail) != 2)
        throw ModelFileError(Kind::malformed, "bad model file header '" + meta + "'");
    const std::string body = bytes.substr(nl2 + 1);
    if (body.size() < length)
        throw ModelFileError(Kind::truncated, "payload has " + std::to_string(body.size()) + " of " +
                                                  std::to_string(length) + " bytes");
    if (body.size() > length) throw ModelFileError(Kind::malformed, "trailing bytes after the payload");
    if (fnv1a64(body) != checksum) throw ModelFileError(Kind::checksum, "payload checksum mismatch");

    try {
        const json j = json::parse(body);
        ModelBundle m;
        const auto role = j.at("role").get<std::string>();
        if (role == "direct")
            m.role = ModelRole::direct;
        else if (role == "pricing")
            m.role = ModelRole::pricing;
        else
            throw ModelFileError(Kind::malformed, "unknown model role '" + role + "'");
        m.model = parse_model(j.at("model").get<std::string>());
        m.spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        m.spec.output = parse_activation(j.at("output_activation").get<std::string>());
        for (const auto& l : j.at("layers"))
            m.weights.layers.push_back({matrix_from(l.at("w")), l.at("b").get<std::vector<double>>()});
        m.scaler.bounds.lower = j.at("bounds_lb").get<std::vector<double>>();
        m.scaler.bounds.upper = j.at("bounds_ub").get<std::vector<double>>();
        m.grid.strikes = j.at("grid_strikes").get<std::vector<double>>();
        m.grid.maturities = j.at("grid_maturities").get<std::vector<double>>();
        if (j.contains("whitener")) {
            const auto& w = j.at("whitener");
            m.whitener = Whitener{w.at("mean").get<std::vector<double>>(), matrix_from(w.at("w")),
                                  matrix_from(w.at("w_inv")), w.at("eig_floor").get<double>()};
        }
        check_shapes(m.spec, m.weights);
        m.scaler.bounds.validate();
        m.grid.validate();
        return m;
    } catch (const ModelFileError&) {
        throw;
    } catch (const std::exception& e) {
        throw ModelFileError(Kind::malformed, std::string("bad model payload: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const ModelBundle& m) {
    const std::string bytes = serialize_model(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << bytes;
    out.flush();
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

ModelBundle load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace volcal
