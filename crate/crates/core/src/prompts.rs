//! Prompt texts for every model call site.
//!
//! Extraction, rationale, direct-feedback, revision, target-price,
//! holistic and counterpart prompts are kept word for word (including their
//! original spelling) because the in-context exemplars were tuned against
//! them. Prompts are written from the buyer's perspective; [`role_swap`]
//! derives the seller versions.

use crate::domain::{Money, Role};

pub const EXTRACTION_INSTRUCTION: &str = r#"#INSTRUCTION
You have to extract priced offers from messages. Just give the dollar amount and nothing else. If no offer was proposed yet then say so. If an offer was accepted then say so. If the offer is presented as range of prices, then give both the prices. Do not ellicitate your reasoning.

#EXAMPLES
Message : "I will be willing to pay something from 10k to 11k"
Offer:  "10000 to 11000".

Message: "so i am uh looking for this car and my current price range is between uh eleven thousand and five hundred to twelve thousand dollars"
Offer: "11500 to 12000"

Message: "Ooh, that's kind of rough. Our sticker price for this car is closer to $14,000."
Offer: "14000"

Message: "Yes 12000 sounds like a good price for me."
Offer: "Accepted."

Message: "That's well beyond my price, I can't do that"
Offer: "Refused."

Message: "Sure. No Problem"
Offer: "No offer."

Message: "I don't think I am able to do that"
Offer: "Refused."

Message: "12,500... I mean, could we call it even $13,000?
Offer: "13000"

Message: "You said you would be willing to pay 12k ?"
Offer: "Rephrasing."

#EXTRACTION
"#;

/// The nine in-context extraction exemplars as (message, answer) pairs.
pub const EXTRACTION_EXEMPLARS: [(&str, &str); 9] = [
    ("I will be willing to pay something from 10k to 11k", "\"10000 to 11000\"."),
    (
        "so i am uh looking for this car and my current price range is between uh eleven thousand and five hundred to twelve thousand dollars",
        "\"11500 to 12000\"",
    ),
    (
        "Ooh, that's kind of rough. Our sticker price for this car is closer to $14,000.",
        "\"14000\"",
    ),
    ("Yes 12000 sounds like a good price for me.", "\"Accepted.\""),
    ("That's well beyond my price, I can't do that", "\"Refused.\""),
    ("Sure. No Problem", "\"No offer.\""),
    ("I don't think I am able to do that", "\"Refused.\""),
    ("12,500... I mean, could we call it even $13,000?", "\"13000\""),
    ("You said you would be willing to pay 12k ?", "\"Rephrasing.\""),
];

/// The user-message half of the extraction prompt.
pub fn extraction_message(utterance: &str) -> String {
    format!("Message: {utterance}\nOffer:")
}

pub fn rationale_prompt(passage: &str) -> String {
    format!(
        r#"#INSTRUCTION
We are here in the context of a negotiation. Your task is to detect if the buyer gives sufficient rationale/argument along with their offer or not in the passage.

We think of rationales as a piece of argumentation that can justify a mentioned price. Rationales should be related to the item purchased (clearly mentioning some specific features or price ranges etc…). Nevertheless, we can think of exceptions such as “You're a friend so I can maybe push it a bit to…”

#EXAMPLE

Passage: "Buyer: Hello I'd like to make an offer
Seller: Great what were you thinking ?
Buyer: I don't know something like 10k ?"
Rationale :False

Passage: "Buyer: Hello, this car is in great shape for its mileage, I was looking for a similar car on the internet. I like it and my kids would have a great time in it. Can I make an offer ?
Seller: Sure how much ?
Buyer: Something around 10k ?"
Rationale :True

Passage: "Buyer: Yeah I guess i can do 12,500. It seems reasonable.
Seller: Can you push it more to 13,5?
Buyer: No sorry, 12,5 nothing more."
Rationale : False

#Task

Passage : {passage}
Rationale :Answer here"#
    )
}

pub fn icebreaker_prompt(utterance: &str) -> String {
    format!(
        r#"#INSTRUCTION
We are here in the context of a negotiation. Your task is to detect whether the buyer began the negotiation with some social bonding.
A negotiator should spend their first conversational turn on social remarks unrelated to the negotiation issues, such as greetings, asking about the other person's day, or praising what they are selling. A first turn that already discusses prices, budgets or the terms of the deal is not breaking the ice.
Answer True if the buyer's first turn breaks the ice and False otherwise.

#Task

First turn : {utterance}
Breaking the ice :Answer here"#
    )
}

pub fn closing_prompt(final_turns: &str) -> String {
    format!(
        r#"#INSTRUCTION
We are here in the context of a negotiation that just ended with a deal. Your task is to detect whether the buyer closed the deal in ways that heighten the seller's commitment.
The final two turns of the buyer should contain either an acknowledgment of the seller's negotiation skill or a recounting of the buyer's own concessions. The closing turns should not contain any celebratory statements about the negotiation outcome or any statements implying that the buyer got a better deal.
Answer True if the closing is strategic and False otherwise.

#Task

Final buyer turns : {final_turns}
Strategic closing :Answer here"#
    )
}

pub fn rationale_feedback_prompt(passage: &str) -> String {
    format!(
        r#"#INSTRUCTION
We are here in the context of a negotiation. You are an assistant aimed help a buyer in a negotiation and give them comments on their offers. In this passage: {passage}

The buyer did not give enough arguments to justify their offer.

Give the buyer a quick explanation. Try to quote some words the buyer said.

EXAMPLE OF EXPLANATION:
"{RATIONALE_EXEMPLAR}""#
    )
}

pub const RATIONALE_EXEMPLAR: &str = "When you present a revised offer, it’s persuasive to give some explanation for the move. Why are you offering more? Why are you resisting offering everything they ask for? The explanations you provide may be subjective, such as your eagerness to reach a deal or your pressing budget constraints, but some words of explanation like this help the seller understand and accept your perspective. ";

/// Threshold feedback for opening offers (`offer_kind = "first offer"`) and
/// counteroffers (`offer_kind = "counteroffer"`).
pub fn threshold_feedback_prompt(
    conversation: &str,
    offer_kind: &str,
    seller_offer: Option<Money>,
    target: Money,
    threshold: Money,
) -> String {
    format!(
        r#"You are an assistant aimed to reedit text to help a buyer in a negotiation and provide them feedback on their offer.
Here is the conversation :
{conversation}

Give them an explanation.

Example of good explanation:

"{}""#,
        threshold_explanation(offer_kind, seller_offer, target, threshold, false)
    )
}

/// The exemplar explanation with its numeric slots filled. `grouped` picks
/// learner-facing "$13,000" over the prompt's plain "$13000".
pub fn threshold_explanation(
    offer_kind: &str,
    seller_offer: Option<Money>,
    target: Money,
    threshold: Money,
    grouped: bool,
) -> String {
    let fmt = |m: Money| {
        if grouped {
            m.to_string()
        } else {
            format!("${}", m.get())
        }
    };
    let lead = match seller_offer {
        Some(s) => format!(
            "Considering the seller's offer of {} and your target price of {}",
            fmt(s),
            fmt(target)
        ),
        None => format!("Considering your target price of {}", fmt(target)),
    };
    format!(
        "{lead}, a strong {offer_kind} would ideally be below {}. This approach helps to keep your target price near the midpoint of the range under discussion.",
        fmt(threshold)
    )
}

pub const ICEBREAKER_EXEMPLAR: &str = "Begin your negotiation conversation with some brief social conversation before delving into the economic issues. Show esteem for the other person (your counterpart) by praising what they are selling or asking about their day. “Breaking the ice” in some way through initial personal conversation creates rapport, which tends to increase openness and cooperativeness.";

pub const FIRST_OFFER_EXEMPLAR: &str = "Negotiation research finds a benefit to speaking your opening offer first. It can “anchor” the other person’s judgment of the price range, setting the stage for a more favorable outcome.";

pub const CLOSING_EXEMPLAR: &str = "As you close the deal, acknowledge the seller's skill as a negotiator or recount the concessions you made to get here. Celebrating the outcome, or hinting that you got the better end of the bargain, can leave the seller feeling they lost and weaken their commitment to the agreement.";

/// Direct-feedback prompt for categories explained by a definition and an
/// instructor exemplar (ice breaking, first offer, closing).
pub fn definition_feedback_prompt(conversation: &str, error: &str, exemplar: &str) -> String {
    format!(
        r#"#INSTRUCTION
We are here in the context of a negotiation. You are an assistant aimed help a buyer in a negotiation and give them comments on their messages. In this passage: {conversation}

{error}

Give the buyer a quick explanation. Try to quote some words the buyer said.

EXAMPLE OF EXPLANATION:
"{exemplar}""#
    )
}

pub fn summary_prompt(comments: &str) -> String {
    format!(
        r#"#INSTRUCTION
We are here in the context of a negotiation. Different teachers gave comments to the buyer about the same message:
{comments}

Summarize these comments into a single short explanation addressed to the buyer in the second person (You). Keep every distinct piece of advice and any prices that were mentioned.

Summary:"#
    )
}

pub fn revision_prompt(message: &str, comments: &str) -> String {
    format!(
        r#"We are in the context of a negotiation. Different teachers gave comments to the buyer:
Your task is to propose an alternative message the buyer could have sent that would match all the comments given by teachers.

For example if a comment is saying that the buyer should open the conversation with an ice breaker, then propose an icebreaker. If a comment is saying that they should add rationales to their offers, then rewrite the offer and add a few rationales to it. You have to put yourself in the buyer's position. Assume that you are talking to the seller.

#EXAMPLE1 :
- MESSAGE:
"Seems a little steep, steep for me. You know, I can do something in the, you know, $12,000 range would really be, you know, near the top of the end of my budget. Do you have any flexibility there? You know, anything we can do to, you know, work on that price?"

-COMMENTS:
"comment 1: "Negotiation research finds a benefit to speaking your opening offer first. It can “anchor” the other person’s judgment of the price range, setting the stage for a more favorable outcome."
comment 2: "Considering your target price of $10000, a strong first offer would ideally be below $9000. This approach helps to keep your target price near the midpoint of the range under discussion."

- ANSWER: "The price seems a little steep for me. I can work with something in the $9,000 range, which is near the top end of my budget. I want to ensure that we can reach a mutually beneficial agreement. Is there any flexibility on the price from your end?"

#EXAMPLE2:
-MESSAGE:
"Hi, I'm looking for probably a Honda Accord with reasonable mileage around maybe $15000. Do you have anything like that?"

-COMMENTS:
"comment 1: "Begin your negotiation conversation with some brief social conversation before delving into the economic issues. Show esteem for the other person (your counterpart) by praising what they are selling or asking about their day. “Breaking the ice” in some way through initial personal conversation creates rapport, which tends to increase openness and cooperativeness.
comment 2: "Negotiation research finds that opening offers are most effective when accompanied by a rationale in terms of some objective reference point, such as an expert’s valuation of the object under negotiation or market value indicated by past sales prices."
-ANSWER: "Hey ! It has been a long time are you doing ?"

#YOUR TURN TO DO IT NOW
-MESSAGE:
{message}
- COMMENTS:
{comments}
- ANSWER:"#
    )
}

pub fn low_target_prompt(target: Money, market_min: Money) -> String {
    format!(
        r#"You are an assistant aimed to give advice to help a buyer in a negotiation. You are addressing directly to the buyer, use the second person (You).

The buyer made an error setting their target price for the negotiation. The buyer set their target price to ${}. However a good target price should be above the minimum market value for the car which is ${}.

Give the buyer feedback explaining their error including details about what would be a good target price.
Here is an example of good feedback:
This overly ambitious target is below the market range for the car.  It may cause offense. By overreaching, you may miss out on good deal."#,
        target.get(),
        market_min.get()
    )
}

pub fn high_target_prompt(target: Money, range_hi: Money, market_min: Money) -> String {
    format!(
        r#"You are an assistant aimed to give advice to help a buyer in a negotiation. You are addressing directly to the buyer, use the second person (You).

The buyer made an error setting their target price for the negotiation. The buyer set their target price to ${}. However a good target price should be below ${} and closer to the minimum market range for the car which is ${}.

Give the buyer feedback explaining their error including details about what would be a good target price.
Here is an example of good feedback:
Your target price of {} is not ambitious enough to test how far this seller can be pushed. You should aspire to a price at the low end of the market range."#,
        target.get(),
        range_hi.get(),
        market_min.get(),
        target.get()
    )
}

pub fn walk_away_prompt(walk_away: Money, correct: &str) -> String {
    format!(
        r#"You are an assistant aimed to give advice to help a buyer in a negotiation. You are addressing directly to the buyer, use the second person (You).

The buyer made an error setting their walk-away price for the negotiation. The buyer set their walk-away price to ${}. However {correct}

Give the buyer feedback explaining their error including details about what would be a good walk-away price.
Here is an example of good feedback:
Your walk-away point should come from the facts of your situation. When you have a firm budget, that budget is the most you can pay, so it is your walk-away point."#,
        walk_away.get()
    )
}

pub fn planned_opening_prompt(opening: Money, target: Money, threshold: Money) -> String {
    format!(
        r#"You are an assistant aimed to give advice to help a buyer in a negotiation. You are addressing directly to the buyer, use the second person (You).

The buyer made an error planning their opening offer for the negotiation. The buyer planned to open at ${}. With a target price of ${}, a strong first offer would ideally be at or below ${}.

Give the buyer feedback explaining their error including details about what would be a good opening offer.
Here is an example of good feedback:
Negotiation research finds a benefit to speaking your opening offer first. It can “anchor” the other person’s judgment of the price range, setting the stage for a more favorable outcome. Make that anchor ambitious so your target sits near the midpoint of the range under discussion."#,
        opening.get(),
        target.get(),
        threshold.get()
    )
}

pub fn holistic_prompt(transcript: &str) -> String {
    format!(
        r#"Given the negotiation transcript: {transcript}

Your goal is to to build a constructive feedback to a user in order to them reaching a better outcome if they had to go over this negotiation again. You will focus on the linguistics aspect and strategic aspects and dont bother with discussing the prices offered. You are adressing directly to the buyer, use the second person (You).
Here are the dimensions your feedback will include:

- Formality: A buyer cannot be rude and pushy. Also a good buyer stays polite.
- Firmness: A buyer cannot be too emotional. Studied have shown that firm and tough levels of communication help reaching better economic outcome than warmth and too friendly.
- Linguistic level: A buyer should not be apologizing. Buyer do not say the word “greedy” (can be interpreted as a personal attack).
As a buyer you should project that you do not need to buy a car/you have a perfectly good alternative. The buyer also should somehow mention that they have a plan B.

Feedback:"#
    )
}

/// Appended when a holistic reply failed to quote the learner.
pub const HOLISTIC_QUOTE_REMINDER: &str =
    "Quote at least one exact phrase the buyer wrote, word for word, inside quotation marks.";

pub fn other_feedback_prompt(transcript: &str) -> String {
    format!(
        r#"Here is a negotiation between a buyer and a seller:
{transcript}

Give three suggestions on how the buyer can improve their performance in the next negotiation. Number them 1., 2. and 3.

Suggestions:"#
    )
}

pub const GUARDRAIL_REPLY: &str = "That's a very unrealistic price. Please start with an offer that aligns with the market range for this kind of car. Otherwise I can't take time to talk with you about this car.";

/// Counterpart instructions for the used-car seller. `{limit}` and `{floor}`
/// are substituted at every turn.
pub const USED_CAR_AGENT_TEMPLATE: &str = r#"You are a chatbot designed for negotiation. The discussion has to be fluent and realistic. The Honda has reasonable mileage (50,000 miles), automatic transmission, air conditioning, power steering/windows/door locks, and a CD player. It looks great: a dark green without any rust. You need to sell the car for a price above ${limit}. You will not sell the car for below that amount. You are selling the car as a private individual not a dealer. Try not to be redundant in your arguments and talks (do not repeat what you already said in previous turns). If you give the buyer a counteroffer make sure any new offers are lower than the price you gave previously. Make sure you negotiate hard and never offer a price lower than what the buyer gives you. Do not mention that you need to sell the car for over ${limit}. If the buyer offers a price below ${floor} respond with "That's a very unrealistic price. Please start with an offer that aligns with the market range for this kind of car. Otherwise I can't take time to talk with you about this car.""#;

pub const SUBLEASE_AGENT_TEMPLATE: &str = r#"You are a chatbot designed for negotiation. The discussion has to be fluent and realistic. You are subleasing your furnished one-bedroom apartment for the summer (June through August). It is a ten minute walk from campus, has in-unit laundry, air conditioning and a small balcony, and utilities are included. You need to sublease the apartment for a total price above ${limit}. You will not sublease it for below that amount. Try not to be redundant in your arguments and talks (do not repeat what you already said in previous turns). If you give the subletter a counteroffer make sure any new offers are lower than the price you gave previously. Make sure you negotiate hard and never offer a price lower than what the subletter gives you. Do not mention that you need to sublease the apartment for over ${limit}. If the subletter offers a total below ${floor} respond with "That's a very unrealistic price. Please start with an offer that aligns with the market range for this kind of sublease. Otherwise I can't take time to talk with you about this apartment.""#;

/// Substitutes the counterpart's current limit and guardrail threshold.
pub fn render_agent_template(template: &str, limit: Money, floor: Money) -> String {
    template
        .replace("{limit}", &limit.grouped())
        .replace("{floor}", &floor.grouped())
}

/// Swaps buyer and seller wording so buyer-perspective prompts can coach a
/// seller.
pub fn role_swap(text: &str) -> String {
    const PAIRS: [(&str, &str); 4] = [
        ("buyer", "seller"),
        ("Buyer", "Seller"),
        ("BUYER", "SELLER"),
        ("subletter", "sublessor"),
    ];
    let mut out = text.to_owned();
    for (i, (a, b)) in PAIRS.iter().enumerate() {
        let marker = format!("\u{0}{i}\u{0}");
        out = out.replace(a, &marker).replace(b, a).replace(&marker, b);
    }
    out
}

/// Applies [`role_swap`] when coaching a seller.
pub fn for_role(text: String, learner_role: Role) -> String {
    match learner_role {
        Role::Buyer => text,
        Role::Seller => role_swap(&text),
    }
}

/// Parses a classifier reply of the form "True"/"Rationale :False".
pub fn parse_bool_reply(reply: &str) -> Option<bool> {
    let lower = reply.to_ascii_lowercase();
    let t = lower.find("true");
    let f = lower.find("false");
    match (t, f) {
        (Some(_), None) => Some(true),
        (None, Some(_)) => Some(false),
        (Some(a), Some(b)) => Some(a < b),
        (None, None) => None,
    }
}
