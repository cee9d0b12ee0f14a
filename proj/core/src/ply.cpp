#include "gsalign/ply.hpp"
#include "gsalign/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace gsalign {

namespace {

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

struct PropertyType {
    std::string name;
    int size;
};

int type_size(const std::string& type) {
    static const std::map<std::string, int> sizes = {
        {"char", 1},  {"int8", 1},   {"uchar", 1},  {"uint8", 1},  {"short", 2},   {"int16", 2},
        {"ushort", 2}, {"uint16", 2}, {"int", 4},    {"int32", 4},  {"uint", 4},    {"uint32", 4},
        {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8}};
    const auto it = sizes.find(type);
    return it == sizes.end() ? -1 : it->second;
}

double decode(const unsigned char* p, const std::string& type) {
    if (type == "float" || type == "float32") {
        float v;
        std::memcpy(&v, p, 4);
        return v;
    }
    if (type == "double" || type == "float64") {
        double v;
        std::memcpy(&v, p, 8);
        return v;
    }
    if (type == "char" || type == "int8") return static_cast<std::int8_t>(*p);
    if (type == "uchar" || type == "uint8") return *p;
    if (type == "short" || type == "int16") {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    if (type == "ushort" || type == "uint16") {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    if (type == "int" || type == "int32") {
        std::int32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

std::string expected_list() {
    std::string s;
    for (const auto& n : ply_property_names()) s += (s.empty() ? "" : " ") + n;
    return s;
}

// Flattened values of one primitive in ply_property_names() order.
void to_values(const GaussianPrimitive& p, float* v) {
    int k = 0;
    for (int i = 0; i < 3; ++i) v[k++] = p.position[i];
    for (int c = 0; c < 3; ++c) v[k++] = p.sh[c];
    for (int c = 0; c < 3; ++c)
        for (int b = 1; b < kShBasisCount; ++b) v[k++] = p.sh[b * 3 + c];
    v[k++] = p.opacity_logit;
    for (int i = 0; i < 3; ++i) v[k++] = p.log_scale[i];
    for (int i = 0; i < 4; ++i) v[k++] = p.rotation[i];
}

GaussianPrimitive from_values(const double* v) {
    GaussianPrimitive p;
    int k = 0;
    for (int i = 0; i < 3; ++i) p.position[i] = static_cast<float>(v[k++]);
    for (int c = 0; c < 3; ++c) p.sh[c] = static_cast<float>(v[k++]);
    for (int c = 0; c < 3; ++c)
        for (int b = 1; b < kShBasisCount; ++b) p.sh[b * 3 + c] = static_cast<float>(v[k++]);
    p.opacity_logit = static_cast<float>(v[k++]);
    for (int i = 0; i < 3; ++i) p.log_scale[i] = static_cast<float>(v[k++]);
    for (int i = 0; i < 4; ++i) p.rotation[i] = static_cast<float>(v[k++]);
    return p;
}

}  // namespace

const std::vector<std::string>& ply_property_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"};
        for (int i = 0; i < 45; ++i) n.push_back("f_rest_" + std::to_string(i));
        n.push_back("opacity");
        for (int i = 0; i < 3; ++i) n.push_back("scale_" + std::to_string(i));
        for (int i = 0; i < 4; ++i) n.push_back("rot_" + std::to_string(i));
        return n;
    }();
    return names;
}

void save_map(const std::filesystem::path& path, const GaussianMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const auto& names = ply_property_names();
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << map.size() << "\n";
    for (const auto& n : names) out << "property float " << n << "\n";
    out << "end_header\n";
    std::vector<float> row(names.size());
    for (const auto& p : map.primitives()) {
        to_values(p, row.data());
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing " + path.string());
}

GaussianMap load_map(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    long line_no = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next_line() || line != "ply") throw ParseError("not a PLY file: " + path.string(), line_no);

    std::string format;
    std::size_t vertex_count = 0;
    bool in_vertex = false, seen_vertex = false, element_before_vertex = false;
    std::vector<PropertyType> props;
    std::vector<std::string> prop_types;
    for (;;) {
        if (!next_line()) throw ParseError("PLY header has no end_header", line_no);
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "end_header") break;
        if (key == "comment" || key == "obj_info" || key.empty()) continue;
        if (key == "format") {
            ls >> format;
        } else if (key == "element") {
            std::string name;
            long long count = -1;
            ls >> name >> count;
            if (count < 0) throw ParseError("malformed element line", line_no);
            in_vertex = name == "vertex";
            if (in_vertex) {
                vertex_count = static_cast<std::size_t>(count);
                seen_vertex = true;
            } else if (!seen_vertex && count > 0) {
                element_before_vertex = true;
            }
        } else if (key == "property") {
            std::string type, name;
            ls >> type >> name;
            if (!in_vertex) continue;
            if (type == "list") throw ParseError("list properties are not supported on vertices", line_no);
            const int size = type_size(type);
            if (size < 0) throw ParseError("unknown PLY property type '" + type + "'", line_no);
            props.push_back({name, size});
            prop_types.push_back(type);
        } else {
            throw ParseError("unexpected PLY header keyword '" + key + "'", line_no);
        }
    }
    if (!seen_vertex) throw ParseError("PLY has no vertex element; expected properties: " + expected_list());
    if (element_before_vertex) throw ParseError("PLY elements before 'vertex' are not supported");
    if (format != "binary_little_endian" && format != "ascii")
        throw ParseError("unsupported PLY format '" + format + "'");

    const auto& names = ply_property_names();
    std::vector<int> column(names.size(), -1);
    for (std::size_t j = 0; j < names.size(); ++j)
        for (std::size_t k = 0; k < props.size(); ++k)
            if (props[k].name == names[j]) column[j] = static_cast<int>(k);
    std::string missing;
    for (std::size_t j = 0; j < names.size(); ++j)
        if (column[j] < 0) missing += (missing.empty() ? "" : " ") + names[j];
    if (!missing.empty())
        throw ParseError("PLY vertex layout is missing properties [" + missing +
                         "]; expected properties: " + expected_list());

    std::vector<GaussianPrimitive> prims;
    prims.reserve(vertex_count);
    std::vector<double> values(props.size());
    std::vector<double> ordered(names.size());
    if (format == "ascii") {
        for (std::size_t i = 0; i < vertex_count; ++i) {
            if (!next_line()) throw ParseError("PLY ended after " + std::to_string(i) + " vertices", line_no);
            std::istringstream ls(line);
            for (auto& v : values)
                if (!(ls >> v)) throw ParseError("too few values in PLY vertex row", line_no);
            for (std::size_t j = 0; j < names.size(); ++j) ordered[j] = values[column[j]];
            prims.push_back(from_values(ordered.data()));
        }
    } else {
        std::size_t stride = 0;
        std::vector<std::size_t> offset(props.size());
        for (std::size_t k = 0; k < props.size(); ++k) {
            offset[k] = stride;
            stride += static_cast<std::size_t>(props[k].size);
        }
        std::vector<unsigned char> row(stride);
        for (std::size_t i = 0; i < vertex_count; ++i) {
            in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(stride));
            if (in.gcount() != static_cast<std::streamsize>(stride))
                throw ParseError("PLY binary payload truncated at vertex " + std::to_string(i));
            for (std::size_t j = 0; j < names.size(); ++j)
                ordered[j] = decode(row.data() + offset[column[j]], prop_types[column[j]]);
            prims.push_back(from_values(ordered.data()));
        }
    }
    return GaussianMap(std::move(prims));
}

}  // namespace gsalign
