#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ragev {

struct Document {
    std::string doc_id;
    std::string title;
    std::string text;
    std::optional<std::string> source_uri;
    std::map<std::string, std::string> metadata;

    bool operator==(const Document&) const = default;
};

enum class CollectionKind { Relevant, SomeNoise, NoiseOnly, Contrafactual };

const char* to_string(CollectionKind kind);
CollectionKind parse_collection_kind(std::string_view text);

// Ordered set of documents with unique ids. Mutated only through add_document
// while loading; read-only afterwards.
class Collection {
public:
    Collection() = default;
    Collection(std::string collection_id, std::string name, CollectionKind kind);

    const std::string& collection_id() const { return collection_id_; }
    const std::string& name() const { return name_; }
    CollectionKind kind() const { return kind_; }
    const std::vector<Document>& documents() const { return documents_; }
    std::size_t size() const { return documents_.size(); }
    bool empty() const { return documents_.empty(); }

    const Document* find(std::string_view doc_id) const;

    // Throws Conflict on a duplicate id, InvalidArgument on blank text.
    void add(Document doc);

    bool operator==(const Collection&) const = default;

private:
    std::string collection_id_;
    std::string name_;
    CollectionKind kind_ = CollectionKind::Relevant;
    std::vector<Document> documents_;
};

Collection create_collection(const std::string& name, CollectionKind kind = CollectionKind::Relevant);
Collection& add_document(Collection& collection, Document doc);

// One JSON object per line: id, title, text, optional source_uri, metadata.
Document document_from_json(const nlohmann::json& record);
nlohmann::ordered_json document_to_json(const Document& doc);

// Reads a JSON Lines document file into a new collection named after the file.
Collection load_collection(const std::filesystem::path& path);
void save_collection(const Collection& collection, const std::filesystem::path& path);

// Manifest: {"collection_id","name","kind","documents":[...]} where each entry is
// either a path (relative to the manifest) of a JSON Lines file or an inline
// document object.
Collection load_manifest(const std::filesystem::path& manifest_path);
// Writes <dir>/documents.jsonl plus <dir>/manifest.json referencing it.
std::filesystem::path save_manifest(const Collection& collection, const std::filesystem::path& dir);

}  // namespace ragev
