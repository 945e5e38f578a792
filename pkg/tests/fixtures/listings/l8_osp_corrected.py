import anthropic

client = anthropic.Anthropic()

def generate_creative_story(topic):
    message = client.messages.create(
        model="claude-3-5-sonnet-20241022",
        max_tokens=1024,
        messages=[
            {"role": "user", "content": f"Write a sci-fi story about {topic}"}
        ],
        temperature=0.9, #or top_p=0.95,
    )
    return message.content[0].text
