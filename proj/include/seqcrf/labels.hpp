#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace seqcrf {

// Annotation categories, in the order of the corpus statistics table.
enum class Category : int {
  kADE = 0,
  kIndication,
  kOtherSSD,
  kSeverity,
  kDrugname,
  kDuration,
  kDosage,
  kRoute,
  kFrequency,
};

inline constexpr std::size_t kNumCategories = 9;

inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::kADE,      Category::kIndication, Category::kOtherSSD,
    Category::kSeverity, Category::kDrugname,   Category::kDuration,
    Category::kDosage,   Category::kRoute,      Category::kFrequency,
};

std::string_view category_name(Category c);
// Accepts the canonical names ("Other_SSD" also as "OtherSSD").
std::optional<Category> parse_category(std::string_view name);

// Entity span over tokens [start, end], inclusive.
struct Span {
  int start = 0;
  int end = 0;
  Category category = Category::kADE;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span& a, const Span& b) {
    if (a.start != b.start) return a.start <=> b.start;
    if (a.end != b.end) return a.end <=> b.end;
    return static_cast<int>(a.category) <=> static_cast<int>(b.category);
  }
};

// BIO label vocabulary: index 0 is Outside, then B-/I- pairs per category.
class LabelSpace {
 public:
  LabelSpace();  // all nine categories
  explicit LabelSpace(std::vector<Category> categories);

  std::size_t size() const { return 1 + 2 * categories_.size(); }
  const std::vector<Category>& categories() const { return categories_; }

  int outside() const { return 0; }
  int begin(Category c) const;
  int inside(Category c) const;
  bool is_begin(int label) const { return label > 0 && label % 2 == 1; }
  bool is_inside(int label) const { return label > 0 && label % 2 == 0; }
  std::optional<Category> category_of(int label) const;

  std::string name(int label) const;
  // Parses "O", "B-<cat>", "I-<cat>"; throws naming the unknown category.
  int index(std::string_view name) const;

 private:
  int slot(Category c) const;
  std::vector<Category> categories_;
  std::array<int, kNumCategories> slot_of_{};
};

}  // namespace seqcrf
