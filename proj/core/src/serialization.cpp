#include "bagreg/serialization.hpp"

#include "bagreg/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace bagreg {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "bagreg-model";
constexpr int kVersion = 1;

json matrix_json(const Matrix& m) {
    json data = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Matrix matrix_from(const json& j) {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
        throw DataError("matrix entry count does not match its shape");
    }
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Index i = 0; i < rows; ++i) {
        for (Index jj = 0; jj < cols; ++jj) m(i, jj) = data[k++].get<double>();
    }
    return m;
}

Vector vector_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

std::string model_to_json(const RegressionModel& model) {
    model.validate();
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["kind"] = to_string(model.kind);
    j["alpha"] = vector_json(model.alpha);
    j["intercept"] = model.intercept;
    j["label_offset"] = model.label_offset;
    j["sigma"] = model.sigma;
    j["rho"] = model.rho;
    j["eta"] = model.eta;
    j["kernel"] = {{"bandwidth", model.kernel.bandwidth},
                   {"conv_scale", model.kernel.conv_scale},
                   {"r_choice", model.kernel.r_choice == RChoice::RK ? "k" : "conv"}};
    j["landmarks"] = {{"tied", model.landmarks.tied}, {"u", matrix_json(model.landmarks.u)}};
    if (!model.landmarks.tied) j["landmarks"]["z"] = matrix_json(model.landmarks.z);
    if (model.noise.Sigma.size() > 0) {
        j["noise"] = {{"Sigma", matrix_json(model.noise.Sigma)},
                      {"m0", vector_json(model.noise.m0)},
                      {"m0_z", vector_json(model.noise.m0_z)}};
    }
    if (model.weight_cov.size() > 0) j["weight_cov"] = matrix_json(model.weight_cov);
    if (model.posterior_draws.size() > 0) j["posterior_draws"] = matrix_json(model.posterior_draws);
    if (!model.metadata.empty()) j["metadata"] = model.metadata;
    return j.dump(1);
}

RegressionModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("model file is not valid JSON: ") + e.what());
    }
    RegressionModel m;
    try {
        if (j.value("format", "") != kFormat) throw DataError("not a bagreg model file");
        if (j.at("version").get<int>() != kVersion) throw DataError("unsupported model file version");
        m.kind = model_kind_from_string(j.at("kind").get<std::string>());
        m.alpha = vector_from(j.at("alpha"));
        m.intercept = j.at("intercept").get<double>();
        m.label_offset = j.at("label_offset").get<double>();
        m.sigma = j.at("sigma").get<double>();
        m.rho = j.at("rho").get<double>();
        m.eta = j.at("eta").get<double>();
        const auto& k = j.at("kernel");
        m.kernel.bandwidth = k.at("bandwidth").get<double>();
        m.kernel.conv_scale = k.at("conv_scale").get<double>();
        const auto r = k.at("r_choice").get<std::string>();
        if (r != "k" && r != "conv") throw DataError("unknown r_choice '" + r + "'");
        m.kernel.r_choice = r == "k" ? RChoice::RK : RChoice::RConv;
        const auto& lm = j.at("landmarks");
        if (lm.at("tied").get<bool>()) {
            m.landmarks = LandmarkSet::tied_to(matrix_from(lm.at("u")));
        } else {
            m.landmarks.tied = false;
            m.landmarks.u = matrix_from(lm.at("u"));
            m.landmarks.z = matrix_from(lm.at("z"));
        }
        if (j.contains("noise")) {
            const auto& nz = j.at("noise");
            m.noise.Sigma = matrix_from(nz.at("Sigma"));
            m.noise.m0 = vector_from(nz.at("m0"));
            m.noise.m0_z = vector_from(nz.at("m0_z"));
        }
        if (j.contains("weight_cov")) m.weight_cov = matrix_from(j.at("weight_cov"));
        if (j.contains("posterior_draws")) m.posterior_draws = matrix_from(j.at("posterior_draws"));
        if (j.contains("metadata")) m.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
    m.validate();
    return m;
}

void save_model(const std::string& path, const RegressionModel& model) {
    const std::string text = model_to_json(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << text << '\n';
    if (!out) throw Error("failed writing '" + path + "'");
}

RegressionModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

}  // namespace bagreg
