#include "leakdetect/nn/model_io.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <string>

#include "leakdetect/error.hpp"

namespace leakdetect::nn {

namespace {

using json = nlohmann::json;

constexpr const char* kFormatTag = "leakdetect-lstm";

[[noreturn]] void format_error(const std::string& what) { throw Error(ErrorCode::model_format, "model file: " + what); }

template <typename M>
json flatten(const M& m)
{
    json a = json::array();
    for (Index k = 0; k < m.size(); ++k) {
        const double v = static_cast<double>(m.data()[k]);
        if (!std::isfinite(v)) throw Error(ErrorCode::model_format, "refusing to save a non-finite weight");
        a.push_back(v);
    }
    return a;
}

template <typename M>
void unflatten(const json& a, M& m, const std::string& name)
{
    if (!a.is_array()) format_error(name + " is not an array");
    if (static_cast<Index>(a.size()) != m.size())
        format_error(name + " has " + std::to_string(a.size()) + " values, expected " + std::to_string(m.size()));
    for (Index k = 0; k < m.size(); ++k) {
        const json& v = a[static_cast<std::size_t>(k)];
        if (!v.is_number()) format_error(name + " holds a non-number");
        m.data()[k] = static_cast<typename M::Scalar>(v.get<double>());
    }
}

const json& field(const json& obj, const char* key)
{
    if (!obj.is_object() || !obj.contains(key)) format_error(std::string("missing field '") + key + "'");
    return obj.at(key);
}

template <typename T>
T get(const json& obj, const char* key)
{
    try {
        return field(obj, key).get<T>();
    } catch (const json::exception&) {
        format_error(std::string("field '") + key + "' has the wrong type");
    }
}

const char* mode_name(SequenceMode m) { return m == SequenceMode::full_sequence ? "full_sequence" : "last_step"; }

SequenceMode parse_mode(const std::string& s)
{
    if (s == "full_sequence") return SequenceMode::full_sequence;
    if (s == "last_step") return SequenceMode::last_step;
    format_error("unknown lstm mode '" + s + "'");
}

const char* activation_name(Activation a)
{
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
    case Activation::none: break;
    }
    return "none";
}

Activation parse_activation(const std::string& s)
{
    if (s == "relu") return Activation::relu;
    if (s == "softmax") return Activation::softmax;
    if (s == "none") return Activation::none;
    format_error("unknown activation '" + s + "'");
}

template <typename S>
json lstm_json(const char* name, const LstmLayer<S>& l)
{
    return {{"name", name},
            {"type", "lstm"},
            {"input_dim", l.input_dim},
            {"hidden_dim", l.hidden_dim},
            {"mode", mode_name(l.mode)},
            {"W", flatten(l.W)},
            {"U", flatten(l.U)},
            {"b", flatten(l.b)}};
}

template <typename S>
json dense_json(const char* name, const DenseLayer<S>& l)
{
    return {{"name", name},
            {"type", "dense"},
            {"input_dim", l.input_dim},
            {"output_dim", l.output_dim},
            {"activation", activation_name(l.activation)},
            {"W", flatten(l.W)},
            {"b", flatten(l.b)}};
}

json dropout_json(const char* name, const DropoutSpec& d) { return {{"name", name}, {"type", "dropout"}, {"rate", d.rate}}; }

const json& layer_named(const json& layers, const char* name, const char* type)
{
    for (const json& l : layers) {
        if (l.is_object() && l.contains("name") && l.at("name") == name) {
            if (get<std::string>(l, "type") != type) format_error(std::string("layer ") + name + " is not " + type);
            return l;
        }
    }
    format_error(std::string("missing layer ") + name);
}

Index positive_dim(const json& l, const char* key)
{
    const auto d = get<long long>(l, key);
    if (d <= 0 || d > (1 << 20)) format_error(std::string(key) + " out of range");
    return static_cast<Index>(d);
}

template <typename S>
LstmLayer<S> parse_lstm(const json& layers, const char* name)
{
    const json& l = layer_named(layers, name, "lstm");
    LstmLayer<S> out;
    out.input_dim = positive_dim(l, "input_dim");
    out.hidden_dim = positive_dim(l, "hidden_dim");
    out.mode = parse_mode(get<std::string>(l, "mode"));
    out.W.resize(4 * out.hidden_dim, out.input_dim);
    out.U.resize(4 * out.hidden_dim, out.hidden_dim);
    out.b.resize(4 * out.hidden_dim);
    unflatten(field(l, "W"), out.W, std::string(name) + ".W");
    unflatten(field(l, "U"), out.U, std::string(name) + ".U");
    unflatten(field(l, "b"), out.b, std::string(name) + ".b");
    return out;
}

template <typename S>
DenseLayer<S> parse_dense(const json& layers, const char* name)
{
    const json& l = layer_named(layers, name, "dense");
    DenseLayer<S> out;
    out.input_dim = positive_dim(l, "input_dim");
    out.output_dim = positive_dim(l, "output_dim");
    out.activation = parse_activation(get<std::string>(l, "activation"));
    out.W.resize(out.output_dim, out.input_dim);
    out.b.resize(out.output_dim);
    unflatten(field(l, "W"), out.W, std::string(name) + ".W");
    unflatten(field(l, "b"), out.b, std::string(name) + ".b");
    return out;
}

DropoutSpec parse_dropout(const json& layers, const char* name)
{
    return DropoutSpec{get<double>(layer_named(layers, name, "dropout"), "rate")};
}

}  // namespace

template <typename S>
void save_model(std::ostream& out, const Network<S>& net)
{
    net.check();
    json doc;
    doc["format"] = kFormatTag;
    doc["schema_version"] = net.schema_version;
    doc["sequence_length"] = net.sequence_length;
    doc["norm"] = {{"mean", net.norm.mean}, {"std", net.norm.std}};
    doc["layers"] = json::array({lstm_json("lstm1", net.lstm1), dropout_json("dropout1", net.dropout1),
                                 lstm_json("lstm2", net.lstm2), dropout_json("dropout2", net.dropout2),
                                 dense_json("dense1", net.dense1), dense_json("dense2", net.dense2),
                                 dense_json("output", net.output)});
    out << doc.dump(1) << '\n';
    if (!out) throw Error(ErrorCode::io, "failed writing model");
}

template <typename S>
void save_model(const std::filesystem::path& path, const Network<S>& net)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
    save_model(out, net);
}

template <typename S>
Network<S> load_model(std::istream& in)
{
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        format_error(std::string("not valid JSON (truncated or corrupt): ") + e.what());
    }
    if (!doc.is_object()) format_error("top level is not an object");
    if (!doc.contains("format") || doc.at("format") != kFormatTag) format_error("not a leakdetect model");
    const int version = get<int>(doc, "schema_version");
    if (version != kModelSchemaVersion)
        throw Error(ErrorCode::schema_version, "model schema_version " + std::to_string(version) +
                                                   " is not supported (this build reads version " +
                                                   std::to_string(kModelSchemaVersion) + ")");

    Network<S> net;
    net.schema_version = version;
    const auto length = get<long long>(doc, "sequence_length");
    if (length < 0) format_error("negative sequence_length");
    net.sequence_length = static_cast<std::size_t>(length);
    const json& norm = field(doc, "norm");
    net.norm.mean = get<double>(norm, "mean");
    net.norm.std = get<double>(norm, "std");
    if (!(net.norm.std > 0.0)) format_error("norm std must be positive");

    const json& layers = field(doc, "layers");
    if (!layers.is_array()) format_error("layers is not an array");
    net.lstm1 = parse_lstm<S>(layers, "lstm1");
    net.dropout1 = parse_dropout(layers, "dropout1");
    net.lstm2 = parse_lstm<S>(layers, "lstm2");
    net.dropout2 = parse_dropout(layers, "dropout2");
    net.dense1 = parse_dense<S>(layers, "dense1");
    net.dense2 = parse_dense<S>(layers, "dense2");
    net.output = parse_dense<S>(layers, "output");

    net.spec.input_dim = net.lstm1.input_dim;
    net.spec.lstm1_units = net.lstm1.hidden_dim;
    net.spec.lstm2_units = net.lstm2.hidden_dim;
    net.spec.dense1_units = net.dense1.output_dim;
    net.spec.dense2_units = net.dense2.output_dim;
    net.spec.num_classes = net.output.output_dim;
    net.spec.dropout_rate = net.dropout1.rate;
    if (net.dropout2.rate != net.dropout1.rate) format_error("dropout rates differ between layers");
    try {
        net.check();
    } catch (const Error& e) {
        format_error(e.what());
    }
    return net;
}

template <typename S>
Network<S> load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open model " + path.string());
    return load_model<S>(in);
}

template void save_model(std::ostream&, const Network<float>&);
template void save_model(std::ostream&, const Network<double>&);
template void save_model(const std::filesystem::path&, const Network<float>&);
template void save_model(const std::filesystem::path&, const Network<double>&);
template Network<float> load_model<float>(std::istream&);
template Network<double> load_model<double>(std::istream&);
template Network<float> load_model<float>(const std::filesystem::path&);
template Network<double> load_model<double>(const std::filesystem::path&);

}  // namespace leakdetect::nn
