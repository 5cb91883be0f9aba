// Health-insurance shaped fixture: the same schema the engine's own tests
// build against, so studio behaviour is exercised on realistic shapes.

export const INSURANCE_SCHEMA = {
  classes: [
    { name: "Personnes",
      attributes: [
        { name: "nom", type: "string" },
        { name: "prenom", type: "string" },
        { name: "date_naissance", type: "date" },
      ],
      operations: ["age(): integer"] },
    { name: "Praticiens",
      attributes: [
        { name: "specialite_prat", type: "string" },
        { name: "num_ordre", type: "string" },
      ],
      operations: [] },
    { name: "Beneficiaires",
      attributes: [
        { name: "num_secu", type: "string" },
        { name: "regime", type: "string" },
      ],
      operations: [] },
    { name: "Actes",
      attributes: [
        { name: "code_acte", type: "string" },
        { name: "Date_exec", type: "date" },
        { name: "Quantité", type: "integer" },
        { name: "Prix Unitaire", type: "decimal" },
        { name: "Taux Remb", type: "decimal" },
        { name: "Qté_acte", type: "integer" },
      ],
      operations: [] },
    { name: "Cabinets",
      attributes: [
        { name: "nom_cab", type: "string" },
        { name: "Ville", type: "string" },
        { name: "Département", type: "string" },
        { name: "Région", type: "string" },
        { name: "date_creation", type: "date" },
        { name: "Adresse", type: "string", semantic: "address" },
      ],
      operations: [] },
    { name: "Pharmacie",
      attributes: [{ name: "licence", type: "string" }],
      operations: [] },
  ],
  links: [
    { name: "est_personne_prat", kind: "inheritance",
      source: "Praticiens", target: "Personnes" },
    { name: "est_personne_benef", kind: "inheritance",
      source: "Beneficiaires", target: "Personnes" },
    { name: "est_cabinet", kind: "inheritance",
      source: "Pharmacie", target: "Cabinets" },
    { name: "Prescrit_par", kind: "association",
      source: "Actes", target: "Praticiens",
      cardinality: { source: [0, "many"], target: [1, 1] } },
    { name: "Concerne", kind: "association",
      source: "Actes", target: "Beneficiaires",
      cardinality: { source: [0, "many"], target: [1, 1] } },
    { name: "Exerce_dans", kind: "association",
      source: "Praticiens", target: "Cabinets",
      cardinality: { source: [0, "many"], target: [1, 1] } },
  ],
};

export const INSURANCE_BATCH = [
  { id: "prat1", class: "Praticiens",
    values: { nom: "Durand", prenom: "Paul",
      specialite_prat: "Cardiologie", num_ordre: "O-1" },
    links: { Exerce_dans: ["cab1"] } },
  { id: "prat2", class: "Praticiens",
    values: { nom: "Martin", prenom: "Lise",
      specialite_prat: "Radiologie", num_ordre: "O-2" },
    links: { Exerce_dans: ["cab2"] } },
  { id: "ben1", class: "Beneficiaires",
    values: { nom: "Petit", prenom: "Anne", num_secu: "S-1", regime: "general" } },
  { id: "cab1", class: "Cabinets",
    values: { nom_cab: "Cabinet du Capitole", Ville: "Toulouse",
      "Département": "31", "Région": "Occitanie",
      date_creation: "1980-05-10", Adresse: "2 place du Capitole, Toulouse" } },
  { id: "cab2", class: "Cabinets",
    values: { nom_cab: "Cabinet Albigeois", Ville: "Albi",
      "Département": "81", "Région": "Occitanie",
      date_creation: "1970-01-15", Adresse: "4 rue Mariès, Albi" } },
  { id: "cab3", class: "Cabinets",
    values: { nom_cab: "Cabinet des Ramiers", Ville: "Blagnac",
      "Département": "31", "Région": "Occitanie",
      date_creation: "1985-03-02", Adresse: "1 allée des Ramiers, Blagnac" } },
  { id: "act1", class: "Actes",
    values: { code_acte: "C10", Date_exec: "1998-11-15",
      "Quantité": 2, "Prix Unitaire": 10, "Taux Remb": 0.5, "Qté_acte": 2 },
    links: { Prescrit_par: ["prat1"], Concerne: ["ben1"] } },
  { id: "act2", class: "Actes",
    values: { code_acte: "R20", Date_exec: "1998-11-16",
      "Quantité": 1, "Prix Unitaire": 30, "Taux Remb": 0.8, "Qté_acte": 1 },
    links: { Prescrit_par: ["prat2"], Concerne: ["ben1"] } },
];
