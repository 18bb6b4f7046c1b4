#include "ragev/corpus_store.hpp"

#include <atomic>
#include <fstream>
#include <unordered_set>

#include "ragev/error.hpp"
#include "ragev/text.hpp"

namespace ragev {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string next_collection_id(const std::string& name) {
    static std::atomic<unsigned> counter{0};
    const unsigned n = ++counter;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%08llx-%u",
                  static_cast<unsigned long long>(fnv1a64(name) & 0xffffffffULL), n);
    return "col-" + std::string(buf);
}

std::string require_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw_invalid(std::string("missing key '") + key + "'");
    if (!it->is_string()) throw_invalid(std::string("key '") + key + "' must be a string");
    return it->get<std::string>();
}

void add_jsonl_file(Collection& collection, const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        Document doc;
        try {
            doc = document_from_json(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::InvalidArgument) throw ParseError(line_no, e.what());
            throw;
        }
        collection.add(std::move(doc));
    }
}

}  // namespace

const char* to_string(CollectionKind kind) {
    switch (kind) {
        case CollectionKind::Relevant: return "relevant";
        case CollectionKind::SomeNoise: return "some_noise";
        case CollectionKind::NoiseOnly: return "noise_only";
        case CollectionKind::Contrafactual: return "contrafactual";
    }
    return "relevant";
}

CollectionKind parse_collection_kind(std::string_view text) {
    const std::string k = to_lower_ascii(text);
    if (k == "relevant") return CollectionKind::Relevant;
    if (k == "some_noise" || k == "somenoise") return CollectionKind::SomeNoise;
    if (k == "noise_only" || k == "noiseonly") return CollectionKind::NoiseOnly;
    if (k == "contrafactual" || k == "counterfactual") return CollectionKind::Contrafactual;
    throw_invalid("unknown collection kind '" + std::string(text) + "'");
}

Collection::Collection(std::string collection_id, std::string name, CollectionKind kind)
    : collection_id_(std::move(collection_id)), name_(std::move(name)), kind_(kind) {}

const Document* Collection::find(std::string_view doc_id) const {
    for (const auto& d : documents_) {
        if (d.doc_id == doc_id) return &d;
    }
    return nullptr;
}

void Collection::add(Document doc) {
    if (doc.doc_id.empty()) throw_invalid("document id is empty");
    if (trim(doc.text).empty()) throw_invalid("document '" + doc.doc_id + "' has empty text");
    if (find(doc.doc_id) != nullptr) {
        throw Error(ErrorKind::Conflict, "duplicate document id '" + doc.doc_id + "'");
    }
    documents_.push_back(std::move(doc));
}

Collection create_collection(const std::string& name, CollectionKind kind) {
    if (name.empty()) throw_invalid("collection name is empty");
    return Collection(next_collection_id(name), name, kind);
}

Collection& add_document(Collection& collection, Document doc) {
    collection.add(std::move(doc));
    return collection;
}

Document document_from_json(const json& record) {
    if (!record.is_object()) throw_invalid("document record must be an object");
    Document doc;
    doc.doc_id = require_string(record, "id");
    doc.title = require_string(record, "title");
    doc.text = require_string(record, "text");
    if (auto it = record.find("source_uri"); it != record.end() && !it->is_null()) {
        if (!it->is_string()) throw_invalid("source_uri must be a string");
        doc.source_uri = it->get<std::string>();
    }
    if (auto it = record.find("metadata"); it != record.end() && !it->is_null()) {
        if (!it->is_object()) throw_invalid("metadata must be an object");
        for (const auto& [k, v] : it->items()) {
            if (!v.is_string()) throw_invalid("metadata values must be strings");
            doc.metadata.emplace(k, v.get<std::string>());
        }
    }
    return doc;
}

ordered_json document_to_json(const Document& doc) {
    ordered_json j;
    j["id"] = doc.doc_id;
    j["title"] = doc.title;
    j["text"] = doc.text;
    if (doc.source_uri) j["source_uri"] = *doc.source_uri;
    if (!doc.metadata.empty()) {
        ordered_json meta = ordered_json::object();
        for (const auto& [k, v] : doc.metadata) meta[k] = v;
        j["metadata"] = std::move(meta);
    }
    return j;
}

Collection load_collection(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorKind::NotFound, "no such file: " + path.string());
    Collection collection = create_collection(path.stem().string());
    add_jsonl_file(collection, path);
    return collection;
}

void save_collection(const Collection& collection, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::NotFound, "cannot write " + path.string());
    for (const auto& doc : collection.documents()) out << document_to_json(doc).dump() << '\n';
}

Collection load_manifest(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open manifest " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(1, e.what());
    }
    const std::string name = require_string(manifest, "name");
    const CollectionKind kind = manifest.contains("kind")
                                    ? parse_collection_kind(manifest.at("kind").get<std::string>())
                                    : CollectionKind::Relevant;
    const std::string id =
        manifest.contains("collection_id") ? manifest.at("collection_id").get<std::string>() : "";
    Collection collection = id.empty() ? create_collection(name, kind) : Collection(id, name, kind);
    const auto docs = manifest.value("documents", json::array());
    for (const auto& entry : docs) {
        if (entry.is_string()) {
            add_jsonl_file(collection, manifest_path.parent_path() / entry.get<std::string>());
        } else {
            collection.add(document_from_json(entry));
        }
    }
    return collection;
}

fs::path save_manifest(const Collection& collection, const fs::path& dir) {
    fs::create_directories(dir);
    save_collection(collection, dir / "documents.jsonl");
    ordered_json manifest;
    manifest["collection_id"] = collection.collection_id();
    manifest["name"] = collection.name();
    manifest["kind"] = to_string(collection.kind());
    manifest["documents"] = ordered_json::array({"documents.jsonl"});
    const fs::path path = dir / "manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    return path;
}

}  // namespace ragev
