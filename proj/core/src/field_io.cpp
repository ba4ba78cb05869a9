#include "nlx/field_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "nlx/error.hpp"

namespace nlx {

static_assert(std::endian::native == std::endian::little, "binary field layout assumes a little-endian host");

namespace {

void check_header(const FiltrationTree& tree, double horizon, int steps, int dim)
{
    if (tree.steps() != steps || tree.dim() != dim || tree.grid().horizon != horizon) {
        throw ContractError("field header {T, N, d} does not match the target tree");
    }
}

template <typename T>
void put(std::ostream& out, T value)
{
    std::array<char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    out.write(bytes.data(), sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
    std::array<char, sizeof(T)> bytes{};
    if (!in.read(bytes.data(), sizeof(T))) {
        throw ContractError("binary field: truncated input");
    }
    T value{};
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

struct Header {
    double horizon;
    int steps;
    int dim;
    int width;
};

Header read_header(std::istream& in)
{
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4) || std::memcmp(magic.data(), "NLXF", 4) != 0) {
        throw ContractError("binary field: bad magic");
    }
    if (get<std::uint32_t>(in) != 1U) {
        throw ContractError("binary field: unsupported version");
    }
    Header h{};
    h.horizon = get<double>(in);
    h.steps = static_cast<int>(get<std::uint32_t>(in));
    h.dim = static_cast<int>(get<std::uint32_t>(in));
    h.width = static_cast<int>(get<std::uint32_t>(in));
    return h;
}

AdaptedField read_body(std::istream& in, const TreePtr& tree, int width)
{
    AdaptedField field(tree, width);
    for (int k = 0; k <= tree->steps(); ++k) {
        if (get<std::uint8_t>(in) == 0) {
            continue;
        }
        Slice values(tree->node_count(k) * static_cast<std::size_t>(width));
        for (double& v : values) {
            v = get<double>(in);
        }
        field.set(k, std::move(values));
    }
    return field;
}

}  // namespace

nlohmann::json to_json(const AdaptedField& field)
{
    const FiltrationTree& tree = field.tree();
    nlohmann::json steps = nlohmann::json::array();
    for (int k = 0; k <= tree.steps(); ++k) {
        if (field.defined(k)) {
            auto s = field.at(k);
            steps.push_back(std::vector<double>(s.begin(), s.end()));
        } else {
            steps.push_back(nullptr);
        }
    }
    return nlohmann::json{
        {"T", tree.grid().horizon},
        {"N", tree.steps()},
        {"d", tree.dim()},
        {"width", field.width()},
        {"steps", std::move(steps)},
    };
}

AdaptedField field_from_json(const nlohmann::json& doc, const TreePtr& tree)
{
    check_header(*tree, doc.at("T").get<double>(), doc.at("N").get<int>(), doc.at("d").get<int>());
    AdaptedField field(tree, doc.value("width", 1));
    const auto& steps = doc.at("steps");
    if (!steps.is_array() || steps.size() != static_cast<std::size_t>(tree->steps()) + 1) {
        throw ContractError("field json: expected N+1 step entries");
    }
    for (int k = 0; k <= tree->steps(); ++k) {
        const auto& entry = steps[static_cast<std::size_t>(k)];
        if (!entry.is_null()) {
            field.set(k, entry.get<Slice>());
        }
    }
    return field;
}

AdaptedField field_from_json(const nlohmann::json& doc)
{
    auto tree = FiltrationTree::build(TimeGrid::make(doc.at("T").get<double>(), doc.at("N").get<int>()),
                                      doc.at("d").get<int>());
    return field_from_json(doc, tree);
}

void write_binary(std::ostream& out, const AdaptedField& field)
{
    const FiltrationTree& tree = field.tree();
    out.write("NLXF", 4);
    put<std::uint32_t>(out, 1U);
    put<double>(out, tree.grid().horizon);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tree.steps()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tree.dim()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(field.width()));
    for (int k = 0; k <= tree.steps(); ++k) {
        const bool defined = field.defined(k);
        put<std::uint8_t>(out, defined ? 1 : 0);
        if (defined) {
            for (double v : field.at(k)) {
                put<double>(out, v);
            }
        }
    }
}

AdaptedField read_binary(std::istream& in, const TreePtr& tree)
{
    const Header h = read_header(in);
    check_header(*tree, h.horizon, h.steps, h.dim);
    return read_body(in, tree, h.width);
}

AdaptedField read_binary(std::istream& in)
{
    const Header h = read_header(in);
    auto tree = FiltrationTree::build(TimeGrid::make(h.horizon, h.steps), h.dim);
    return read_body(in, tree, h.width);
}

}  // namespace nlx
