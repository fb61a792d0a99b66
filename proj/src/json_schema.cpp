#include "pdef/json_schema.hpp"

namespace pdef {

namespace {

bool has_type(const Json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "number") return v.is_number();
    if (t == "integer") {
        if (v.is_number_integer()) return true;
        return v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>()));
    }
    return false;
}

}  // namespace

std::vector<std::string> validate_schema(const Json& schema, const Json& v, const std::string& path) {
    std::vector<std::string> out;
    if (!schema.is_object()) return out;

    if (const auto t = schema.find("type"); t != schema.end()) {
        bool ok = false;
        if (t->is_string()) {
            ok = has_type(v, t->get<std::string>());
        } else if (t->is_array()) {
            for (const auto& alt : *t) ok = ok || (alt.is_string() && has_type(v, alt.get<std::string>()));
        }
        if (!ok) {
            out.push_back(path + ": expected type " + t->dump() + ", got " + v.type_name());
            return out;
        }
    }
    if (const auto e = schema.find("enum"); e != schema.end() && e->is_array()) {
        bool found = false;
        for (const auto& option : *e) found = found || option == v;
        if (!found) out.push_back(path + ": value " + v.dump() + " not in " + e->dump());
    }
    if (const auto c = schema.find("const"); c != schema.end() && *c != v) {
        out.push_back(path + ": expected " + c->dump());
    }
    if (v.is_number()) {
        const double x = v.get<double>();
        if (const auto m = schema.find("minimum"); m != schema.end() && x < m->get<double>()) {
            out.push_back(path + ": " + v.dump() + " below minimum " + m->dump());
        }
        if (const auto m = schema.find("maximum"); m != schema.end() && x > m->get<double>()) {
            out.push_back(path + ": " + v.dump() + " above maximum " + m->dump());
        }
    }
    if (v.is_string()) {
        if (const auto m = schema.find("minLength"); m != schema.end() && v.get<std::string>().size() < m->get<std::size_t>()) {
            out.push_back(path + ": string shorter than " + m->dump());
        }
    }
    if (v.is_array()) {
        if (const auto m = schema.find("minItems"); m != schema.end() && v.size() < m->get<std::size_t>()) {
            out.push_back(path + ": fewer than " + m->dump() + " items");
        }
        if (const auto m = schema.find("maxItems"); m != schema.end() && v.size() > m->get<std::size_t>()) {
            out.push_back(path + ": more than " + m->dump() + " items");
        }
        if (const auto items = schema.find("items"); items != schema.end()) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                auto sub = validate_schema(*items, v[i], path + "[" + std::to_string(i) + "]");
                out.insert(out.end(), sub.begin(), sub.end());
            }
        }
    }
    if (v.is_object()) {
        if (const auto req = schema.find("required"); req != schema.end() && req->is_array()) {
            for (const auto& name : *req) {
                if (name.is_string() && !v.contains(name.get<std::string>())) {
                    out.push_back(path + ": missing required field '" + name.get<std::string>() + "'");
                }
            }
        }
        const auto props = schema.find("properties");
        const auto extra = schema.find("additionalProperties");
        for (const auto& [key, value] : v.items()) {
            const std::string sub_path = path + "." + key;
            if (props != schema.end() && props->contains(key)) {
                auto sub = validate_schema((*props)[key], value, sub_path);
                out.insert(out.end(), sub.begin(), sub.end());
            } else if (extra != schema.end()) {
                if (extra->is_boolean() && !extra->get<bool>()) {
                    out.push_back(path + ": unexpected field '" + key + "'");
                } else if (extra->is_object()) {
                    auto sub = validate_schema(*extra, value, sub_path);
                    out.insert(out.end(), sub.begin(), sub.end());
                }
            }
        }
    }
    return out;
}

}  // namespace pdef
