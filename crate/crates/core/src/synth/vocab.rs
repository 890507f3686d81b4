// SPDX-License-Identifier: Apache-2.0

//! Bundled word lists for synthetic lakes.

pub const SURNAMES: &[&str] = &[
    "James",
    "Durant",
    "Curry",
    "Harden",
    "Antetokounmpo",
    "Jokic",
    "Embiid",
    "Doncic",
    "Tatum",
    "Butler",
    "Leonard",
    "George",
    "Lillard",
    "Irving",
    "Westbrook",
    "Paul",
    "Davis",
    "Towns",
    "Booker",
    "Young",
    "Mitchell",
    "Morant",
    "Williamson",
    "Adebayo",
    "Siakam",
    "Holiday",
    "Middleton",
    "Gobert",
    "Brown",
    "Smart",
    "Messi",
    "Ronaldo",
    "Neymar",
    "Mbappe",
    "Salah",
    "Kane",
    "Lewandowski",
    "Modric",
    "Benzema",
    "Haaland",
    "Griezmann",
    "Suarez",
    "Hazard",
    "Pogba",
    "Kante",
    "Vardy",
    "Sterling",
    "Silva",
    "Fernandes",
    "Dias",
    "McDermott",
    "Robertson",
    "Alexander",
    "Walker",
    "Stones",
    "Rice",
    "Saka",
    "Foden",
    "Grealish",
    "Mount",
    "Muller",
    "Kroos",
    "Neuer",
    "Kimmich",
    "Gnabry",
    "Sane",
    "Havertz",
    "Werner",
    "Reus",
    "Hummels",
    "Garcia",
    "Martinez",
    "Rodriguez",
    "Lopez",
    "Gonzalez",
    "Perez",
    "Sanchez",
    "Ramirez",
    "Torres",
    "Flores",
    "Rivera",
    "Gomez",
    "Diaz",
    "Reyes",
    "Cruz",
    "Morales",
    "Ortiz",
    "Gutierrez",
    "Chavez",
    "Ramos",
    "Nguyen",
    "Tran",
    "Le",
    "Pham",
    "Hoang",
    "Kim",
    "Park",
    "Choi",
    "Jung",
    "Kang",
    "Smith",
    "Johnson",
    "Miller",
    "Wilson",
    "Moore",
    "Taylor",
    "Anderson",
    "Thomas",
    "Jackson",
    "White",
    "Harris",
    "Martin",
    "Thompson",
    "Clark",
    "Lewis",
    "Lee",
    "Hall",
    "Allen",
    "King",
    "Wright",
    "Scott",
    "Green",
    "Baker",
    "Adams",
    "Nelson",
    "Hill",
    "Campbell",
    "Carter",
    "Roberts",
    "Turner",
    "Phillips",
    "Evans",
    "Edwards",
    "Collins",
    "Stewart",
    "Morris",
    "Murphy",
    "Cook",
    "Rogers",
    "Morgan",
    "Peterson",
    "Cooper",
    "Reed",
    "Bailey",
    "Bell",
    "Kelly",
    "Howard",
    "Ward",
    "Cox",
    "Richardson",
    "Wood",
    "Watson",
    "Brooks",
    "Bennett",
    "Gray",
    "Hughes",
    "Price",
    "Sanders",
    "Myers",
    "Long",
    "Ross",
    "Foster",
    "Powell",
    "Jenkins",
    "Perry",
    "Russell",
    "Sullivan",
    "Fisher",
    "Ellis",
    "Hayes",
    "Novak",
    "Horvat",
    "Kovac",
    "Popescu",
    "Ionescu",
    "Jansen",
    "DeVries",
    "Bakker",
    "Visser",
    "Smit",
    "Larsen",
    "Hansen",
    "Nielsen",
    "Berg",
    "Lund",
    "Virtanen",
    "Korhonen",
    "Nowak",
    "Kowalski",
    "Wisniewski",
    "Rossi",
    "Russo",
    "Ferrari",
    "Esposito",
    "Bianchi",
    "Romano",
    "Colombo",
    "Ricci",
    "Marino",
    "Greco",
];

pub const FIRST_NAMES: &[&str] = &[
    "Aaron", "Bella", "Carlos", "Dana", "Elias", "Fatima", "Gabriel", "Hana", "Ivan", "Julia", "Kofi", "Lena", "Marco",
    "Nadia", "Omar", "Priya", "Quinn", "Rosa", "Samir", "Tara", "Umar", "Vera", "Wes", "Xena", "Yusuf", "Zara",
];

pub const NBA_TEAMS: &[&str] = &[
    "LAL", "GSW", "BKN", "HOU", "MIL", "DEN", "PHI", "DAL", "BOS", "MIA", "LAC", "POR", "PHX", "ATL", "UTA", "MEM",
    "NOP", "TOR", "CHI", "CLE", "NYK", "SAC", "IND", "MIN", "OKC", "ORL", "WAS", "DET", "CHA", "SAS",
];

pub const NBA_POSITIONS: &[&str] = &["F", "SF", "G", "PG", "SG", "PF", "C"];

pub const CLUBS: &[&str] = &[
    "Barcelona",
    "Real Madrid",
    "Juventus",
    "Bayern",
    "Liverpool",
    "Arsenal",
    "Chelsea",
    "PSG",
    "Inter",
    "Milan",
    "Ajax",
    "Porto",
    "Benfica",
    "Dortmund",
    "Napoli",
    "Roma",
    "Sevilla",
    "Valencia",
    "Celtic",
    "Galatasaray",
    "Fenerbahce",
    "Olympiacos",
    "Feyenoord",
    "Lyon",
    "Marseille",
    "Atletico",
    "Everton",
    "Tottenham",
    "Leicester",
    "Villarreal",
];

pub const FOOTBALL_POSITIONS: &[&str] = &["RW", "GK", "LW", "CB", "ST", "CM", "CDM", "LB", "RB", "CAM"];

pub const COUNTRIES: &[&str] = &[
    "Argentina",
    "Brazil",
    "France",
    "Germany",
    "Spain",
    "Italy",
    "Portugal",
    "England",
    "Netherlands",
    "Belgium",
    "Croatia",
    "Uruguay",
    "Colombia",
    "Mexico",
    "Japan",
    "Korea",
    "Nigeria",
    "Ghana",
    "Egypt",
    "Morocco",
    "Senegal",
    "Poland",
    "Sweden",
    "Norway",
    "Denmark",
    "Finland",
    "Austria",
    "Switzerland",
    "Canada",
    "Chile",
    "Peru",
    "Turkey",
    "Greece",
    "Serbia",
    "Ukraine",
    "Romania",
    "Hungary",
    "Ireland",
    "Scotland",
    "Wales",
];

pub const CITY_ROOTS: &[&str] = &[
    "Amber", "Ash", "Bay", "Bright", "Cedar", "Clear", "Cold", "Crest", "Deep", "Dry", "East", "Elm", "Fair", "Fern",
    "Fox", "Glen", "Gold", "Green", "Grey", "Hart", "High", "Holly", "Iron", "Ivy", "Kings", "Lake", "Long", "Maple",
    "Marsh", "Mill", "Moss", "North", "Oak", "Pine", "Red", "Rock", "Rose", "Salt", "Sand", "Silver", "South",
    "Spring", "Stone", "Sun", "Thorn", "West", "White", "Wild", "Willow", "Wolf",
];

pub const CITY_SUFFIXES: &[&str] = &[
    "ford", "ton", "bury", "field", "haven", "port", "dale", "wick", "mouth", "stead", "ville", "brook",
];

pub const SECTORS: &[&str] = &[
    "Energy",
    "Retail",
    "Banking",
    "Insurance",
    "Software",
    "Hardware",
    "Pharma",
    "Biotech",
    "Mining",
    "Logistics",
    "Telecom",
    "Media",
    "Automotive",
    "Aerospace",
    "Food",
    "Chemicals",
];

pub const COMPANY_SUFFIXES: &[&str] = &[
    "Holdings",
    "Labs",
    "Group",
    "Industries",
    "Systems",
    "Partners",
    "Works",
    "Dynamics",
    "Capital",
    "Foods",
];

pub const GENRES: &[&str] = &[
    "Drama",
    "Comedy",
    "Thriller",
    "Horror",
    "Western",
    "Musical",
    "Documentary",
    "Animation",
    "Romance",
    "Fantasy",
    "Mystery",
    "Adventure",
];

pub const TITLE_ADJECTIVES: &[&str] = &[
    "Silent", "Broken", "Hidden", "Golden", "Last", "Crimson", "Endless", "Frozen", "Wild", "Lost", "Dark", "Bright",
    "Hollow", "Secret", "Burning", "Distant", "Quiet", "Savage", "Gentle", "Electric", "Midnight", "Bitter", "Sweet",
    "Iron", "Paper", "Glass", "Velvet", "Stolen", "Fallen", "Rising",
];

pub const TITLE_NOUNS: &[&str] = &[
    "River", "Empire", "Garden", "Horizon", "Kingdom", "Mirror", "Ocean", "Road", "Shadow", "Storm", "Summer", "Town",
    "Valley", "Winter", "Harbor", "Island", "Letter", "Machine", "Promise", "Signal", "Station", "Tower", "Voyage",
    "Witness", "Echo", "Frontier", "Legacy", "Orchard", "Canyon", "Circus",
];
